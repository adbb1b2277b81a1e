//! Uplink sum rate of `K` users into a centralized circular LIS with
//! matched filtering, in the large-aperture regime:
//! `R ≈ Σ_k log₂(1 + p_k ε_k π r² / σ²)`.
//!
//! No validity guard is applied; the approximation is only meaningful once
//! the surface is large compared to the wavelength.

use crate::error::{Error, Result};
use crate::scalar::{csum, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct UserLink<T> {
    /// Transmit power in watts.
    pub p: T,
    /// Free-space path-loss factor, treated as an opaque gain.
    pub eps: T,
    pub label: String,
}

impl<T: Real> UserLink<T> {
    pub fn new(p: T, eps: T, label: impl Into<String>) -> Result<Self> {
        if !(p.is_finite() && p >= T::zero() && eps.is_finite() && eps >= T::zero()) {
            return Err(Error::InvalidArgument("user power and path loss must be nonnegative".into()));
        }
        Ok(Self { p, eps, label: label.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisConfig<T> {
    radius: T,
    noise: T,
}

impl<T: Real> LisConfig<T> {
    pub fn new(radius: T, noise: T) -> Result<Self> {
        if !(radius.is_finite() && radius > T::zero() && noise.is_finite() && noise > T::zero()) {
            return Err(Error::InvalidArgument("LIS radius and noise power must be positive".into()));
        }
        Ok(Self { radius, noise })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn noise(&self) -> T {
        self.noise
    }

    /// `π r² / σ²`
    pub fn gain(&self) -> T {
        T::pi() * self.radius * self.radius / self.noise
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumRate<T> {
    pub total: T,
    /// One term per user, in input order.
    pub terms: Vec<T>,
}

pub fn lis_sum_rate<T: Real>(users: &[UserLink<T>], lis: &LisConfig<T>) -> Result<SumRate<T>> {
    if users.is_empty() {
        return Err(Error::InvalidArgument("at least one user is required".into()));
    }
    let g = lis.gain();
    let terms: Vec<T> = users.iter().map(|u| (T::one() + u.p * u.eps * g).log2()).collect();
    Ok(SumRate {
        total: csum(terms.iter().copied()),
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_gain_lis() -> LisConfig<f64> {
        LisConfig::new(1.0, PI).unwrap()
    }

    #[test]
    fn single_user_unit_snr() {
        let users = [UserLink::new(1.0, 1.0, "a").unwrap()];
        let r = lis_sum_rate(&users, &unit_gain_lis()).unwrap();
        assert!((r.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_identical_users() {
        let users = vec![UserLink::new(3.0, 1.0, "a").unwrap(); 2];
        let r = lis_sum_rate(&users, &unit_gain_lis()).unwrap();
        assert!((r.total - 4.0).abs() < 1e-14);
        assert_eq!(r.terms.len(), 2);
    }

    #[test]
    fn doubling_radius() {
        let users: Vec<_> = [0.5, 2.0, 1e6]
            .iter()
            .enumerate()
            .map(|(k, &p)| UserLink::new(p, 1.0, format!("u{k}")).unwrap())
            .collect();
        let small = lis_sum_rate(&users, &unit_gain_lis()).unwrap();
        let large = lis_sum_rate(&users, &LisConfig::new(2.0, PI).unwrap()).unwrap();
        let expect: f64 = users
            .iter()
            .map(|u| (1.0 + 4.0 * u.p).log2() - (1.0 + u.p).log2())
            .sum();
        assert!((large.total - small.total - expect).abs() < 1e-12);
        let hi_snr_gain = large.terms[2] - small.terms[2];
        assert!((hi_snr_gain - 2.0).abs() < 1e-5);
    }

    #[test]
    fn total_is_sum_of_terms() {
        let users: Vec<_> = (0..17)
            .map(|k| UserLink::new(0.1 * k as f64, 1e-3 * (k + 1) as f64, k.to_string()).unwrap())
            .collect();
        let r = lis_sum_rate(&users, &LisConfig::new(3.0, 1e-4).unwrap()).unwrap();
        assert!((r.total - r.terms.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_every_parameter() {
        let base = |p: f64, eps: f64, r: f64, s: f64| {
            lis_sum_rate(&[UserLink::new(p, eps, "x").unwrap()], &LisConfig::new(r, s).unwrap())
                .unwrap()
                .total
        };
        let c = base(1.0, 0.5, 1.5, 2.0);
        assert!(base(1.1, 0.5, 1.5, 2.0) > c);
        assert!(base(1.0, 0.6, 1.5, 2.0) > c);
        assert!(base(1.0, 0.5, 1.6, 2.0) > c);
        assert!(base(1.0, 0.5, 1.5, 2.1) < c);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(UserLink::new(-1.0, 1.0, "x").is_err());
        assert!(UserLink::new(1.0, f64::NAN, "x").is_err());
        assert!(LisConfig::new(0.0, 1.0).is_err());
        assert!(LisConfig::new(1.0, 0.0).is_err());
        assert!(lis_sum_rate::<f64>(&[], &unit_gain_lis()).is_err());
    }

    #[test]
    fn silent_user_contributes_nothing() {
        let users = [UserLink::new(0.0, 1.0, "idle").unwrap(), UserLink::new(1.0, 1.0, "on").unwrap()];
        let r = lis_sum_rate(&users, &unit_gain_lis()).unwrap();
        assert_eq!(r.terms[0], 0.0);
    }
}
