//! Degrees-of-freedom limits and eigenvalue-spectrum diagnostics.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::channel::{correlation_matrix, CorrelationModel};
use crate::error::{Error, Result};
use crate::geometry::Aperture;
use crate::scalar::{csum, Real};

/// Eigenvalues below this fraction of the largest are reported as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Negative eigenvalues down to this (relative) level are rounding noise.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Cumulative power fraction defining the significant-mode count.
pub const SIGNIFICANT_POWER: f64 = 0.95;
/// Largest array for which the dense eigensolver cross-check is run.
pub const DENSE_CHECK_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayGeometry {
    Linear,
    Planar,
}

/// Asymptotic spatial DoF of an aperture: `2·length/λ` for a linear array,
/// `π·area/λ²` for a planar one. `extent` is metres or square metres.
pub fn dof_limit<T: Real>(geometry: ArrayGeometry, wavelength: T, extent: T) -> Result<T> {
    if !(wavelength.is_finite() && wavelength > T::zero()) {
        return Err(Error::InvalidArgument("wavelength must be positive".into()));
    }
    if !(extent.is_finite() && extent > T::zero()) {
        return Err(Error::InvalidArgument("array extent must be positive".into()));
    }
    Ok(match geometry {
        ArrayGeometry::Linear => T::lit(2.0) * extent / wavelength,
        ArrayGeometry::Planar => T::pi() * extent / (wavelength * wavelength),
    })
}

/// Fraction of the `(2/λ)²` sampling DoF lost by keeping only propagating
/// waves: `1 − π/4`.
pub fn evanescent_loss<T: Real>() -> T {
    T::one() - T::frac_pi_4()
}

/// `N/n = λ²/(π·Δ_x·Δ_y)`: ratio between the i.i.d. eigenvalue count and
/// the propagating-mode count.
pub fn eigenvalue_count_gap<T: Real>(aperture: &Aperture<T>) -> T {
    T::one() / (T::pi() * aperture.spacing_x() * aperture.spacing_y())
}

/// Sorted spectrum of a correlation matrix with power bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport<T> {
    eigenvalues: Vec<T>,
    total: T,
    cutoff: usize,
    retained: T,
    discarded: T,
    clamped: usize,
}

impl<T: Real> EigenReport<T> {
    /// Sorts, clamps and thresholds raw eigenvalues. Values below
    /// `−1e-10·max` are still clamped to zero but counted in
    /// [`EigenReport::clamped`].
    pub fn from_eigenvalues(mut values: Vec<T>) -> Self {
        values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let max = values.first().copied().unwrap_or_else(T::zero).max(T::zero());
        let floor = max * T::lit(ZERO_THRESHOLD);
        let mut clamped = 0;
        for v in values.iter_mut() {
            if *v < -max * T::lit(NEGATIVE_TOLERANCE) {
                clamped += 1;
            }
            if *v < floor {
                *v = T::zero();
            }
        }
        let total = csum(values.iter().copied());
        let cutoff = values.len();
        Self {
            eigenvalues: values,
            total,
            cutoff,
            retained: T::one(),
            discarded: T::zero(),
            clamped,
        }
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn retained_fraction(&self) -> T {
        self.retained
    }

    pub fn discarded_fraction(&self) -> T {
        self.discarded
    }

    /// Eigenvalues that were more negative than rounding noise.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.eigenvalues.iter().filter(|v| **v > T::zero()).count()
    }

    /// Running power fractions `Σ_{i≤k} λ_i / Σ λ`, one per eigenvalue.
    pub fn cumulative_fractions(&self) -> Vec<T> {
        let mut acc = crate::scalar::CompensatedSum::new();
        self.eigenvalues
            .iter()
            .map(|&v| {
                acc.add(v);
                if self.total > T::zero() {
                    acc.value() / self.total
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    /// The same report truncated after the `keep` largest eigenvalues.
    pub fn with_cutoff(&self, keep: usize) -> Result<Self> {
        let discarded = discarded_power(self, keep)?;
        Ok(Self {
            cutoff: keep,
            retained: T::one() - discarded,
            discarded,
            ..self.clone()
        })
    }

    /// Smallest `k` whose leading eigenvalues hold `fraction` of the power.
    pub fn significant_count(&self, fraction: T) -> usize {
        let target = fraction * self.total;
        let mut acc = crate::scalar::CompensatedSum::new();
        for (k, &v) in self.eigenvalues.iter().enumerate() {
            acc.add(v);
            if acc.value() >= target {
                return k + 1;
            }
        }
        self.eigenvalues.len()
    }
}

/// Spectrum of `Φ diag(σ²) Φᴴ` read off the factors: pooled mode variances
/// padded with `N − n` zeros.
pub fn eigen_spectrum<T: Real>(model: &CorrelationModel<T>) -> EigenReport<T> {
    let mut values = model.mode_eigenvalues();
    values.resize(model.element_count(), T::zero());
    EigenReport::from_eigenvalues(values)
}

/// Spectrum of an explicit Hermitian matrix via the dense eigensolver.
pub fn eigen_spectrum_dense<T: Real>(r: &DMatrix<Complex<T>>) -> Result<EigenReport<T>> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}×{}", r.nrows(), r.ncols()),
        });
    }
    let values = SymmetricEigen::new(r.clone()).eigenvalues.iter().copied().collect();
    Ok(EigenReport::from_eigenvalues(values))
}

/// Largest deviation between the factored spectrum and a dense
/// eigendecomposition of the explicit matrix; `None` above
/// [`DENSE_CHECK_LIMIT`] elements.
pub fn dense_cross_check<T: Real>(model: &CorrelationModel<T>) -> Option<T> {
    if model.element_count() > DENSE_CHECK_LIMIT {
        return None;
    }
    let fast = eigen_spectrum(model);
    let dense = eigen_spectrum_dense(&correlation_matrix(model)).ok()?;
    Some(
        fast.eigenvalues()
            .iter()
            .zip(dense.eigenvalues())
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs())),
    )
}

/// Share of the total power beyond the `keep` largest eigenvalues.
pub fn discarded_power<T: Real>(report: &EigenReport<T>, keep: usize) -> Result<T> {
    if keep > report.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {keep} of {} eigenvalues",
            report.len()
        )));
    }
    if report.total <= T::zero() {
        return Ok(T::zero());
    }
    if keep == 0 {
        return Ok(T::one());
    }
    let tail = csum(report.eigenvalues[keep..].iter().copied());
    Ok(tail / report.total)
}
