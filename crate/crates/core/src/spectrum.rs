//! Per-mode channel variances obtained by integrating the angular power
//! spectrum over each wavenumber cell of the mode lattice.
//!
//! Wavenumbers are normalised by `κ = 2π/λ`, so the propagating region is the
//! unit disk. Mode `(l, m)` owns the cell
//! `[(l−½)/L_x, (l+½)/L_x] × [(m−½)/L_y, (m+½)/L_y]`.
//!
//! The isotropic density is `1/√(1 − ρ²)`. Cells fully inside the disk use a
//! tensor-product midpoint rule. Cells crossing the unit circle are integrated
//! in polar coordinates with `ρ = sin t`, which turns
//! `ρ dρ / √(1 − ρ²)` into `sin t dt` and removes the edge singularity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aperture, ModeIndex, ModeSet};
use crate::scalar::{csum, Real};

pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_AZIMUTH: f64 = 0.0;
pub const DEFAULT_ELEVATION: f64 = 0.0;

/// Angular power distribution of the scatterers seen by one side of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scattering<T> {
    Isotropic,
    /// Single lobe `exp(κ_c·(d·u − 1))` around the direction `d`.
    ///
    /// `elevation` is measured from the array plane, so `π/2` is broadside;
    /// `azimuth` is measured from the x axis.
    Directional {
        azimuth: T,
        elevation: T,
        concentration: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSpec<T> {
    pub kind: Scattering<T>,
    /// Subdivisions per cell and axis.
    pub resolution: usize,
}

impl<T: Real> Default for ScatteringSpec<T> {
    fn default() -> Self {
        Self::isotropic()
    }
}

impl<T: Real> ScatteringSpec<T> {
    pub fn isotropic() -> Self {
        Self {
            kind: Scattering::Isotropic,
            resolution: DEFAULT_RESOLUTION,
        }
    }

    /// Lobe centred at `(azimuth, elevation)`; [`DEFAULT_AZIMUTH`] and
    /// [`DEFAULT_ELEVATION`] give the grazing lobe along the x axis used by
    /// the experiments.
    pub fn directional(azimuth: T, elevation: T, concentration: T) -> Self {
        Self {
            kind: Scattering::Directional {
                azimuth,
                elevation,
                concentration,
            },
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::InvalidArgument("quadrature resolution must be positive".into()));
        }
        if let Scattering::Directional {
            azimuth,
            elevation,
            concentration,
        } = self.kind
        {
            if !(azimuth.is_finite() && elevation.is_finite()) {
                return Err(Error::InvalidArgument("scattering direction must be finite".into()));
            }
            if !(concentration.is_finite() && concentration >= T::zero()) {
                return Err(Error::InvalidArgument("concentration must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Multiplier applied on top of the isotropic density at the unit
    /// propagation vector `(ux, uy, uz)`.
    pub(crate) fn directional_weight(&self, ux: T, uy: T, uz: T) -> T {
        match self.kind {
            Scattering::Isotropic => T::one(),
            Scattering::Directional {
                azimuth,
                elevation,
                concentration,
            } => {
                let (dx, dy, dz) = (
                    elevation.cos() * azimuth.cos(),
                    elevation.cos() * azimuth.sin(),
                    elevation.sin(),
                );
                (concentration * (dx * ux + dy * uy + dz * uz - T::one())).exp()
            }
        }
    }
}

/// Variances `σ²` of the angular-domain coefficients, one per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVariances<T> {
    pub(crate) mode_set: ModeSet<T>,
    pub(crate) sigma_sq: Vec<T>,
    pub(crate) target: T,
}

impl<T: Real> ModeVariances<T> {
    /// Wraps explicit variances, rescaled to sum to `target`.
    pub fn from_weights(mode_set: ModeSet<T>, weights: Vec<T>, target: T) -> Result<Self> {
        if weights.len() != mode_set.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} variances", mode_set.len()),
                got: format!("{}", weights.len()),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
            return Err(Error::InvalidArgument("variances must be finite and nonnegative".into()));
        }
        if !(target.is_finite() && target > T::zero()) {
            return Err(Error::InvalidArgument("normalisation target must be positive".into()));
        }
        let total = csum(weights.iter().copied());
        if total <= T::zero() {
            return Err(Error::InvalidArgument("variances sum to zero".into()));
        }
        let scale = target / total;
        let sigma_sq = weights.into_iter().map(|w| w * scale).collect();
        Ok(Self {
            mode_set,
            sigma_sq,
            target,
        })
    }

    /// Unit variances over `n` anonymous modes; used for the i.i.d. Rayleigh
    /// baseline where the channel has as many modes as elements.
    pub fn unit(n: usize) -> Self {
        let aperture = Aperture::new(T::count(n), T::one(), T::one(), T::one())
            .expect("n×1 aperture with unit spacing");
        let modes = (0..n as i64).map(|l| ModeIndex::new(l, 0)).collect();
        Self {
            mode_set: ModeSet::from_raw(aperture, modes),
            sigma_sq: vec![T::one(); n],
            target: T::count(n),
        }
    }

    pub fn mode_set(&self) -> &ModeSet<T> {
        &self.mode_set
    }

    pub fn sigma_sq(&self) -> &[T] {
        &self.sigma_sq
    }

    pub fn target(&self) -> T {
        self.target
    }

    pub fn len(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_sq.is_empty()
    }

    pub fn sigma(&self) -> Vec<T> {
        self.sigma_sq.iter().map(|v| v.sqrt()).collect()
    }

    pub fn mean(&self) -> T {
        self.target / T::count(self.len())
    }

    /// Same shape rescaled to a new total.
    pub fn renormalized(&self, target: T) -> Result<Self> {
        Self::from_weights(self.mode_set.clone(), self.sigma_sq.clone(), target)
    }

    pub fn get(&self, mode: ModeIndex) -> Option<T> {
        self.mode_set.position(mode).map(|k| self.sigma_sq[k])
    }
}

/// Integrates the angular spectrum over every mode cell and normalises the
/// result to `Σσ² = N`.
pub fn mode_variances<T: Real>(
    aperture: &Aperture<T>,
    modes: &ModeSet<T>,
    spec: &ScatteringSpec<T>,
) -> Result<ModeVariances<T>> {
    if modes.aperture() != aperture {
        return Err(Error::ApertureMismatch);
    }
    spec.validate()?;
    let raw: Vec<T> = modes
        .modes()
        .par_iter()
        .map(|&mode| {
            let v = cell_integral(aperture, mode, spec);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Quadrature { l: mode.l, m: mode.m })
            }
        })
        .collect::<Result<_>>()?;
    ModeVariances::from_weights(modes.clone(), raw, T::count(aperture.element_count()))
}

/// Unnormalised integral of the spectrum over `cell(l, m) ∩ unit disk`.
pub fn cell_integral<T: Real>(aperture: &Aperture<T>, mode: ModeIndex, spec: &ScatteringSpec<T>) -> T {
    let half = T::lit(0.5);
    let x0 = (T::lit(mode.l as f64) - half) / aperture.lx();
    let x1 = (T::lit(mode.l as f64) + half) / aperture.lx();
    let y0 = (T::lit(mode.m as f64) - half) / aperture.ly();
    let y1 = (T::lit(mode.m as f64) + half) / aperture.ly();
    let rect = Rect { x0, x1, y0, y1 };
    if rect.far_radius_sq() < T::one() {
        midpoint_cell(&rect, spec)
    } else {
        polar_cell(&rect, spec)
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect<T> {
    x0: T,
    x1: T,
    y0: T,
    y1: T,
}

impl<T: Real> Rect<T> {
    fn far_radius_sq(&self) -> T {
        let fx = self.x0.abs().max(self.x1.abs());
        let fy = self.y0.abs().max(self.y1.abs());
        fx * fx + fy * fy
    }

    fn contains_origin(&self) -> bool {
        self.x0 <= T::zero() && self.x1 >= T::zero() && self.y0 <= T::zero() && self.y1 >= T::zero()
    }

    /// Radial interval where the ray at angle `theta` lies inside the rectangle.
    fn ray_span(&self, theta: T) -> Option<(T, T)> {
        let (c, s) = (theta.cos(), theta.sin());
        let mut lo = T::zero();
        let mut hi = T::max_value().unwrap();
        for (dir, a, b) in [(c, self.x0, self.x1), (s, self.y0, self.y1)] {
            if dir == T::zero() {
                if a > T::zero() || b < T::zero() {
                    return None;
                }
            } else {
                let (t0, t1) = (a / dir, b / dir);
                let (t0, t1) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                lo = lo.max(t0);
                hi = hi.min(t1);
            }
        }
        (hi > lo).then_some((lo, hi))
    }
}

fn midpoint_cell<T: Real>(rect: &Rect<T>, spec: &ScatteringSpec<T>) -> T {
    let n = spec.resolution;
    let nf = T::count(n);
    let hx = (rect.x1 - rect.x0) / nf;
    let hy = (rect.y1 - rect.y0) / nf;
    let half = T::lit(0.5);
    let mut acc = Vec::with_capacity(n * n);
    for a in 0..n {
        let x = rect.x0 + (T::count(a) + half) * hx;
        for b in 0..n {
            let y = rect.y0 + (T::count(b) + half) * hy;
            let uz = (T::one() - x * x - y * y).sqrt();
            acc.push(spec.directional_weight(x, y, uz) / uz);
        }
    }
    csum(acc) * hx * hy
}

fn polar_cell<T: Real>(rect: &Rect<T>, spec: &ScatteringSpec<T>) -> T {
    let (theta0, theta1) = if rect.contains_origin() {
        (T::zero(), T::two_pi())
    } else {
        let cx = (rect.x0 + rect.x1) * T::lit(0.5);
        let cy = (rect.y0 + rect.y1) * T::lit(0.5);
        let centre = cy.atan2(cx);
        let mut lo = T::zero();
        let mut hi = T::zero();
        for (x, y) in [
            (rect.x0, rect.y0),
            (rect.x0, rect.y1),
            (rect.x1, rect.y0),
            (rect.x1, rect.y1),
        ] {
            let mut d = y.atan2(x) - centre;
            if d > T::pi() {
                d -= T::two_pi();
            } else if d < -T::pi() {
                d += T::two_pi();
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (centre + lo, centre + hi)
    };
    let n_theta = spec.resolution * 2;
    let n_t = spec.resolution;
    let h_theta = (theta1 - theta0) / T::count(n_theta);
    let half = T::lit(0.5);
    let mut acc = Vec::with_capacity(n_theta);
    for a in 0..n_theta {
        let theta = theta0 + (T::count(a) + half) * h_theta;
        let Some((r0, r1)) = rect.ray_span(theta) else {
            continue;
        };
        if r0 >= T::one() {
            continue;
        }
        let t0 = r0.asin();
        let t1 = r1.min(T::one()).asin();
        let ht = (t1 - t0) / T::count(n_t);
        let (ct, st) = (theta.cos(), theta.sin());
        let mut radial = Vec::with_capacity(n_t);
        for b in 0..n_t {
            let t = t0 + (T::count(b) + half) * ht;
            let (rho, uz) = (t.sin(), t.cos());
            radial.push(spec.directional_weight(rho * ct, rho * st, uz) * rho);
        }
        acc.push(csum(radial) * ht);
    }
    csum(acc) * h_theta
}
