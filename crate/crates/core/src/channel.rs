//! Per-side spatial correlation, the separable joint spectrum and seeded
//! channel realisations.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fourier_matrix, Aperture};
use crate::quadrature::gauss_legendre;
use crate::rng::GaussianStream;
use crate::scalar::{cis, csum, Real};
use crate::spectrum::{ModeVariances, Scattering, ScatteringSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// One side's correlation in factored form `Φ diag(σ)² Φᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel<T: Real> {
    phi: DMatrix<Complex<T>>,
    variances: ModeVariances<T>,
    side: Side,
}

impl<T: Real> CorrelationModel<T> {
    pub fn new(aperture: &Aperture<T>, variances: ModeVariances<T>, side: Side) -> Result<Self> {
        let phi = fourier_matrix(aperture, variances.mode_set())?;
        Ok(Self { phi, variances, side })
    }

    pub fn phi(&self) -> &DMatrix<Complex<T>> {
        &self.phi
    }

    pub fn variances(&self) -> &ModeVariances<T> {
        &self.variances
    }

    pub fn sigma(&self) -> Vec<T> {
        self.variances.sigma()
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn element_count(&self) -> usize {
        self.phi.nrows()
    }

    pub fn trace(&self) -> T {
        self.variances.target()
    }

    /// Nonzero eigenvalues of `R` in mode order, one per distinct Fourier
    /// column: modes that alias onto the same column pool their variance.
    /// Equal to `σ²` whenever the spacing is below half a wavelength.
    pub fn mode_eigenvalues(&self) -> Vec<T> {
        let s = self.variances.sigma_sq();
        self.variances
            .mode_set()
            .alias_classes()
            .iter()
            .map(|class| csum(class.iter().map(|&k| s[k])))
            .collect()
    }
}

/// `Φ diag(σ²) Φᴴ`, symmetrised to be exactly Hermitian.
pub fn correlation_matrix<T: Real>(model: &CorrelationModel<T>) -> DMatrix<Complex<T>> {
    let mut scaled = model.phi.clone();
    for (k, &v) in model.variances.sigma_sq().iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    let r = &scaled * model.phi.adjoint();
    hermitian_part(&r)
}

pub(crate) fn hermitian_part<T: Real>(r: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let half = T::lit(0.5);
    (r + r.adjoint()).map(|z| z.scale(half))
}

/// Nonzero spectrum of `R_t ⊗ R_r` from the per-side factors, descending.
pub fn kronecker_eigenvalues<T: Real>(model_t: &CorrelationModel<T>, model_r: &CorrelationModel<T>) -> Vec<T> {
    let et = model_t.mode_eigenvalues();
    let er = model_r.mode_eigenvalues();
    let mut out: Vec<T> = et.iter().flat_map(|&a| er.iter().map(move |&b| a * b)).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Angular-domain channel realisation `H_a` (`n_r × n_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct AngularChannel<T: Real> {
    pub h: DMatrix<Complex<T>>,
    pub seed: u64,
    pub trial: u64,
}

impl<T: Real> AngularChannel<T> {
    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }
}

/// `H_a(i, j) = σ_{r,i}·σ_{t,j}·w_ij` with `w_ij` drawn in column-major order
/// from the `(seed, trial)` stream.
pub fn sample_angular<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    seed: u64,
    trial: u64,
) -> AngularChannel<T> {
    let st = mv_t.sigma();
    let sr = mv_r.sigma();
    let mut stream = GaussianStream::new(seed, trial);
    let h = DMatrix::from_fn(sr.len(), st.len(), |_, _| Complex::<T>::new(T::zero(), T::zero()));
    let mut h = h;
    for j in 0..st.len() {
        for i in 0..sr.len() {
            let w = stream.next_complex();
            let g = sr[i] * st[j];
            h[(i, j)] = Complex::new(T::lit(w.re) * g, T::lit(w.im) * g);
        }
    }
    AngularChannel { h, seed, trial }
}

/// `Φ_r H_a Φ_tᴴ`.
pub fn angular_to_spatial<T: Real>(
    h_a: &DMatrix<Complex<T>>,
    phi_t: &DMatrix<Complex<T>>,
    phi_r: &DMatrix<Complex<T>>,
) -> Result<DMatrix<Complex<T>>> {
    if phi_r.ncols() != h_a.nrows() || phi_t.ncols() != h_a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("H_a of {}×{}", phi_r.ncols(), phi_t.ncols()),
            got: format!("{}×{}", h_a.nrows(), h_a.ncols()),
        });
    }
    Ok(phi_r * h_a * phi_t.adjoint())
}

/// Correlation of the continuous plane-wave field sampled on the element
/// grid, `R_pq = ∫ S(k) e^{i2π k·(x_p − x_q)} dk / ∫ S(k) dk` over the unit
/// disk, so that every diagonal entry is one.
///
/// This is the full-rank correlation the lattice model approximates; its
/// spectrum has a tail beyond the propagating-mode count. Isotropic
/// scattering uses the closed form `sin(2πd)/(2πd)`; other spectra are
/// integrated with Gauss–Legendre in `t = asin ρ` and the trapezoid rule in
/// azimuth, sized to resolve the largest displacement on the aperture.
pub fn exact_correlation<T: Real>(aperture: &Aperture<T>, spec: &ScatteringSpec<T>) -> Result<DMatrix<Complex<T>>> {
    spec.validate()?;
    let (nx, ny) = (aperture.nx(), aperture.ny());
    let (sx, sy) = (aperture.spacing_x(), aperture.spacing_y());
    let width = 2 * ny - 1;
    let offsets: Vec<(i64, i64)> = (-(nx as i64 - 1)..nx as i64)
        .flat_map(|di| (-(ny as i64 - 1)..ny as i64).map(move |dj| (di, dj)))
        .collect();
    let kernel: Vec<Complex<T>> = match spec.kind {
        Scattering::Isotropic => offsets
            .par_iter()
            .map(|&(di, dj)| {
                let dx = T::lit(di as f64) * sx;
                let dy = T::lit(dj as f64) * sy;
                Complex::new(sinc_2d((dx * dx + dy * dy).sqrt()), T::zero())
            })
            .collect(),
        Scattering::Directional { .. } => {
            let extent = (aperture.lx() * aperture.lx() + aperture.ly() * aperture.ly()).sqrt().as_f64();
            let band = (std::f64::consts::TAU * extent).ceil() as usize;
            let quad = DiskRule::new(band + 32, 2 * band + 64, spec);
            let norm = quad.integrate(T::zero(), T::zero());
            if !(norm.re.is_finite() && norm.re > T::zero()) {
                return Err(Error::Quadrature { l: 0, m: 0 });
            }
            offsets
                .par_iter()
                .map(|&(di, dj)| {
                    let v = quad.integrate(T::lit(di as f64) * sx, T::lit(dj as f64) * sy);
                    v.unscale(norm.re)
                })
                .collect()
        }
    };
    let n = nx * ny;
    let at = |di: i64, dj: i64| {
        let a = (di + nx as i64 - 1) as usize;
        let b = (dj + ny as i64 - 1) as usize;
        kernel[a * width + b]
    };
    let r = DMatrix::from_fn(n, n, |p, q| {
        let (pi, pj) = ((p / ny) as i64, (p % ny) as i64);
        let (qi, qj) = ((q / ny) as i64, (q % ny) as i64);
        at(pi - qi, pj - qj)
    });
    Ok(hermitian_part(&r))
}

fn sinc_2d<T: Real>(d: T) -> T {
    let x = T::two_pi() * d;
    if x.abs() < T::lit(1e-8) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// Product rule over the unit disk in `(t, θ)` with `ρ = sin t`, with the
/// spectrum weight `S·ρ dρ = weight·sin t dt` folded into the node weights.
struct DiskRule<T> {
    nodes: Vec<(T, T, T)>,
}

impl<T: Real> DiskRule<T> {
    fn new(n_t: usize, n_theta: usize, spec: &ScatteringSpec<T>) -> Self {
        let (x, w) = gauss_legendre(n_t);
        let quarter = std::f64::consts::FRAC_PI_4;
        let h_theta = std::f64::consts::TAU / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_t * n_theta);
        for (xi, wi) in x.iter().zip(&w) {
            let t = quarter * (xi + 1.0);
            let (rho, uz) = (t.sin(), t.cos());
            for a in 0..n_theta {
                let theta = a as f64 * h_theta;
                let (kx, ky) = (rho * theta.cos(), rho * theta.sin());
                let weight = spec.directional_weight(T::lit(kx), T::lit(ky), T::lit(uz)).as_f64();
                nodes.push((T::lit(kx), T::lit(ky), T::lit(wi * quarter * h_theta * rho * weight)));
            }
        }
        Self { nodes }
    }

    fn integrate(&self, dx: T, dy: T) -> Complex<T> {
        let two_pi = T::two_pi();
        let mut re = Vec::with_capacity(self.nodes.len());
        let mut im = Vec::with_capacity(self.nodes.len());
        for &(kx, ky, w) in &self.nodes {
            let z = cis(two_pi * (kx * dx + ky * dy));
            re.push(z.re * w);
            im.push(z.im * w);
        }
        Complex::new(csum(re), csum(im))
    }
}
