//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::{Complex, RealField};

/// Real floating-point type the channel models are evaluated in (`f32` or `f64`).
pub trait Real: RealField + Copy + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;
    fn as_f64(self) -> f64;

    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// `exp(i·theta)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Neumaier-compensated running sum. Order dependent only through the
/// sequence of `add` calls, so reductions over trial-ordered data are
/// reproducible regardless of how the data were produced.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn csum<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(csum::<f64, _>(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn cis_unit_modulus() {
        let z = cis(0.3f64);
        assert!((z.norm() - 1.0).abs() < 1e-15);
        let w = cis(0.3f32);
        assert!((w.norm() - 1.0).abs() < 1e-6);
    }
}
