//! Point-to-point capacity in the angular domain under three CSI regimes,
//! water-filling, and the large-aperture deterministic equivalent.
//!
//! Noise has unit variance and the input covariance satisfies `tr(Q) ≤ 1`,
//! so `γ` is the receive SNR. Water-filling over eigenvalues `λ_i` therefore
//! uses the budget `γ`: `γ = Σ[μ − 1/λ_i]⁺`, `C = Σ log₂[μλ_i]⁺`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::Gamma;
use rayon::prelude::*;

use crate::channel::sample_angular;
use crate::error::{Error, Result};
use crate::rng::GaussianStream;
use crate::scalar::{csum, CompensatedSum, Real};
use crate::spectrum::ModeVariances;

/// Linear receive SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSpec<T> {
    gamma: T,
}

impl<T: Real> SnrSpec<T> {
    pub fn linear(gamma: T) -> Result<Self> {
        if gamma.is_finite() && gamma > T::zero() {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidArgument("SNR must be positive".into()))
        }
    }

    pub fn from_db(db: T) -> Result<Self> {
        Self::linear(T::lit(10.0).powf(db / T::lit(10.0)))
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }
}

/// Per-mode powers against a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation<T> {
    pub powers: Vec<T>,
    pub budget: T,
}

impl<T: Real> PowerAllocation<T> {
    pub fn uniform(n: usize, budget: T) -> Self {
        Self {
            powers: vec![budget / T::count(n); n],
            budget,
        }
    }

    pub fn total(&self) -> T {
        csum(self.powers.iter().copied())
    }

    pub fn active_count(&self) -> usize {
        self.powers.iter().filter(|p| **p > T::zero()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling<T> {
    /// Water level `μ`.
    pub mu: T,
    pub allocation: PowerAllocation<T>,
    /// `Σ log₂[μλ_i]⁺` in bit/s/Hz.
    pub capacity: T,
}

/// Exact water-filling by scanning active sets of the sorted inverse gains.
///
/// Powers are returned in the order of `eigenvalues`; zero eigenvalues
/// receive no power.
pub fn waterfill<T: Real>(eigenvalues: &[T], budget: T) -> Result<WaterFilling<T>> {
    if !(budget.is_finite() && budget > T::zero()) {
        return Err(Error::InvalidArgument("water-filling budget must be positive".into()));
    }
    if eigenvalues.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
        return Err(Error::InvalidArgument("eigenvalues must be finite and nonnegative".into()));
    }
    let mut order: Vec<usize> = (0..eigenvalues.len()).filter(|&i| eigenvalues[i] > T::zero()).collect();
    if order.is_empty() {
        return Err(Error::RankZero);
    }
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let inv: Vec<T> = order.iter().map(|&i| T::one() / eigenvalues[i]).collect();

    // prefix[k] = Σ_{i<k} 1/λ_(i)
    let mut prefix = Vec::with_capacity(inv.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(T::zero());
    for &v in &inv {
        acc.add(v);
        prefix.push(acc.value());
    }
    let mut active = 1;
    let mut mu = budget + inv[0];
    for k in (1..=inv.len()).rev() {
        let level = (budget + prefix[k]) / T::count(k);
        if level > inv[k - 1] {
            active = k;
            mu = level;
            break;
        }
    }
    let mut powers = vec![T::zero(); eigenvalues.len()];
    let mut terms = Vec::with_capacity(active);
    for (rank, &i) in order.iter().take(active).enumerate() {
        powers[i] = mu - inv[rank];
        terms.push((mu * eigenvalues[i]).log2());
    }
    Ok(WaterFilling {
        mu,
        allocation: PowerAllocation { powers, budget },
        capacity: csum(terms),
    })
}

/// `H Hᴴ` or `Hᴴ H`, whichever is smaller, built from real products
/// `(A + iB)(Aᵀ − iBᵀ)` so the real matrix kernels do the work.
pub fn gram<T: Real>(h: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    if h.nrows() <= h.ncols() {
        outer_gram(h)
    } else {
        outer_gram(&h.adjoint())
    }
}

/// `X Xᴴ`, exactly Hermitian.
fn outer_gram<T: Real>(x: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let a = x.map(|z| z.re);
    let b = x.map(|z| z.im);
    let (at, bt) = (a.transpose(), b.transpose());
    let re = &a * &at + &b * &bt;
    let im = &b * &at - &a * &bt;
    let half = T::lit(0.5);
    DMatrix::from_fn(x.nrows(), x.nrows(), |i, j| {
        Complex::new(
            (re[(i, j)] + re[(j, i)]) * half,
            (im[(i, j)] - im[(j, i)]) * half,
        )
    })
}

/// Nonzero-candidate eigenvalues of `H Hᴴ`, taken from the smaller Gram
/// matrix, clamped at zero, in descending order.
pub fn gram_eigenvalues<T: Real>(h: &DMatrix<Complex<T>>) -> Vec<T> {
    let mut values: Vec<T> = gram(h)
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(T::zero()))
        .collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    values
}

/// `log₂ det(I + scale·H Hᴴ)` through a Cholesky factor of the smaller Gram
/// form.
pub fn log2_det_identity_plus<T: Real>(h: &DMatrix<Complex<T>>, scale: T) -> T {
    let g = gram(h);
    let n = g.nrows();
    let m = DMatrix::<Complex<T>>::identity(n, n) + g.map(|z| z.scale(scale));
    match m.clone().cholesky() {
        Some(chol) => {
            let l = chol.l_dirty().clone();
            T::lit(2.0) * csum((0..n).map(|i| l[(i, i)].re.log2()))
        }
        // Numerically indefinite only when scale·‖H‖² is at rounding level.
        None => csum(
            m.symmetric_eigenvalues()
                .iter()
                .map(|v| v.max(T::default_epsilon()).log2()),
        ),
    }
}

/// Instantaneous-CSIR capacity with `Q = I/n_t` for one realisation:
/// `Σ log₂(1 + (γ/n_t)·λ_i(H Hᴴ))`.
pub fn capacity_csir_uniform<T: Real>(h: &DMatrix<Complex<T>>, gamma: T) -> T {
    log2_det_identity_plus(h, gamma / T::count(h.ncols()))
}

/// Perfect CSIT+CSIR capacity of one realisation. Powers follow the
/// descending eigenvalues of `H Hᴴ`.
pub fn capacity_perfect_csi<T: Real>(h: &DMatrix<Complex<T>>, gamma: T) -> Result<WaterFilling<T>> {
    let eig = gram_eigenvalues(h);
    let max = eig.first().copied().unwrap_or_else(T::zero);
    let floor = max * T::lit(1e-12);
    let eig: Vec<T> = eig.into_iter().map(|v| if v > floor { v } else { T::zero() }).collect();
    waterfill(&eig, gamma)
}

/// Transmit covariance `Q_a = V_a diag(p) V_aᴴ` achieving the perfect-CSI
/// capacity, normalised to `tr(Q_a) = 1`.
pub fn transmit_covariance<T: Real>(h: &DMatrix<Complex<T>>, gamma: T) -> Result<DMatrix<Complex<T>>> {
    let eig = SymmetricEigen::new(outer_gram(&h.adjoint()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let max = eig.eigenvalues[order[0]].max(T::zero());
    let values: Vec<T> = order
        .iter()
        .map(|&k| {
            let v = eig.eigenvalues[k];
            if v > max * T::lit(1e-12) {
                v
            } else {
                T::zero()
            }
        })
        .collect();
    let wf = waterfill(&values, gamma)?;
    let n = h.ncols();
    let mut q = DMatrix::<Complex<T>>::zeros(n, n);
    for (rank, &k) in order.iter().enumerate() {
        let p = wf.allocation.powers[rank] / gamma;
        if p > T::zero() {
            let v = eig.eigenvectors.column(k);
            q += (v * v.adjoint()).map(|z| z.scale(p));
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    StatCsit,
    CsirUniform,
    PerfectCsi,
    Asymptotic,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::StatCsit => "stat-csit",
            Regime::CsirUniform => "csir-uniform",
            Regime::PerfectCsi => "perfect-csi",
            Regime::Asymptotic => "asymptotic",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointInfo<T> {
    pub gamma_t: T,
    pub gamma_r: T,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport<T> {
    pub regime: Regime,
    /// bit/s/Hz
    pub capacity: T,
    pub trials: usize,
    pub stderr: T,
    pub water_level: Option<T>,
    pub active_modes: Option<usize>,
    pub fixed_point: Option<FixedPointInfo<T>>,
}

impl<T: Real> CapacityReport<T> {
    fn monte_carlo(regime: Regime, stats: SampleStats<T>) -> Self {
        Self {
            regime,
            capacity: stats.mean,
            trials: stats.count,
            stderr: stats.stderr,
            water_level: None,
            active_modes: None,
            fixed_point: None,
        }
    }
}

/// Mean and standard error of trial-ordered samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats<T> {
    pub mean: T,
    pub stderr: T,
    pub count: usize,
}

impl<T: Real> SampleStats<T> {
    pub fn from_samples(samples: &[T]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Self {
                mean: T::zero(),
                stderr: T::zero(),
                count,
            };
        }
        let n = T::count(count);
        let mean = csum(samples.iter().copied()) / n;
        let stderr = if count > 1 {
            let ss = csum(samples.iter().map(|&x| (x - mean) * (x - mean)));
            (ss / T::count(count - 1) / n).sqrt()
        } else {
            T::zero()
        };
        Self { mean, stderr, count }
    }
}

/// Runs `f` for trials `0..trials` in parallel and returns the results in
/// trial order.
pub fn per_trial<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(Error::InvalidArgument("at least one trial is required".into()))
    } else {
        Ok(())
    }
}

/// Ergodic version of [`capacity_csir_uniform`].
pub fn capacity_csir_uniform_ergodic<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    trials: usize,
    seed: u64,
) -> Result<CapacityReport<T>> {
    check_trials(trials)?;
    let samples = per_trial(trials, |k| Ok(capacity_csir_uniform(&sample_angular(mv_t, mv_r, seed, k).h, gamma)))?;
    Ok(CapacityReport::monte_carlo(Regime::CsirUniform, SampleStats::from_samples(&samples)))
}

/// Ergodic version of [`capacity_perfect_csi`]; the water level is averaged
/// over realisations.
pub fn capacity_perfect_csi_ergodic<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    trials: usize,
    seed: u64,
) -> Result<CapacityReport<T>> {
    check_trials(trials)?;
    let fills = per_trial(trials, |k| capacity_perfect_csi(&sample_angular(mv_t, mv_r, seed, k).h, gamma))?;
    let caps: Vec<T> = fills.iter().map(|w| w.capacity).collect();
    let mus: Vec<T> = fills.iter().map(|w| w.mu).collect();
    let mut report = CapacityReport::monte_carlo(Regime::PerfectCsi, SampleStats::from_samples(&caps));
    report.water_level = Some(SampleStats::from_samples(&mus).mean);
    Ok(report)
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Fixed point `(Γ_t, Γ_r)` of the separable deterministic equivalent
///
/// ```text
/// Γ_t = (1/n_t) Σ_j σ²_{t,j} / (1 + γ σ²_{t,j} Γ_r)
/// Γ_r = (1/n_t) Σ_i σ²_{r,i} / (1 + γ σ²_{r,i} Γ_t)
/// ```
///
/// by damped iteration (damping ½, start `Γ = 1`). Converged once both maps
/// move their argument by less than `tol`; the reported residual is that
/// move at the returned point.
pub fn solve_fixed_point<T: Real>(
    sigma_sq_t: &[T],
    sigma_sq_r: &[T],
    gamma: T,
    tol: T,
    max_iter: usize,
) -> Result<FixedPointInfo<T>> {
    if !(tol.is_finite() && tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if sigma_sq_t.is_empty() || sigma_sq_r.is_empty() {
        return Err(Error::InvalidArgument("both sides need at least one mode".into()));
    }
    let nt = T::count(sigma_sq_t.len());
    let map_t = |gr: T| csum(sigma_sq_t.iter().map(|&s| s / (T::one() + gamma * s * gr))) / nt;
    let map_r = |gt: T| csum(sigma_sq_r.iter().map(|&s| s / (T::one() + gamma * s * gt))) / nt;
    let half = T::lit(0.5);
    let (mut gt, mut gr) = (T::one(), T::one());
    let mut residual = T::max_value().unwrap();
    for iterations in 0..=max_iter {
        let (ft, fr) = (map_t(gr), map_r(gt));
        residual = (ft - gt).abs().max((fr - gr).abs());
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            return Ok(FixedPointInfo {
                gamma_t: gt,
                gamma_r: gr,
                residual,
                iterations,
            });
        }
        gt = half * gt + half * ft;
        gr = half * gr + half * fr;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: residual.as_f64(),
    })
}

/// Deterministic-equivalent capacity for given fixed-point coefficients:
/// `Σ_j log₂(1 + γσ²_{t,j}Γ_r) + Σ_i log₂(1 + γσ²_{r,i}Γ_t) − n_t γ Γ_t Γ_r log₂e`.
pub fn deterministic_equivalent_capacity<T: Real>(
    sigma_sq_t: &[T],
    sigma_sq_r: &[T],
    gamma: T,
    gamma_t: T,
    gamma_r: T,
) -> T {
    let tx = csum(sigma_sq_t.iter().map(|&s| (T::one() + gamma * s * gamma_r).log2()));
    let rx = csum(sigma_sq_r.iter().map(|&s| (T::one() + gamma * s * gamma_t).log2()));
    let penalty = T::count(sigma_sq_t.len()) * gamma * gamma_t * gamma_r * T::log2_e();
    tx + rx - penalty
}

/// Large-aperture approximation of the uniform-power ergodic capacity.
pub fn capacity_asymptotic<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    tol: T,
    max_iter: usize,
) -> Result<CapacityReport<T>> {
    let fp = solve_fixed_point(mv_t.sigma_sq(), mv_r.sigma_sq(), gamma, tol, max_iter)?;
    let capacity = deterministic_equivalent_capacity(mv_t.sigma_sq(), mv_r.sigma_sq(), gamma, fp.gamma_t, fp.gamma_r);
    Ok(CapacityReport {
        regime: Regime::Asymptotic,
        capacity,
        trials: 0,
        stderr: T::zero(),
        water_level: None,
        active_modes: None,
        fixed_point: Some(fp),
    })
}

/// Diagonal angular-domain allocation used when only the coupling strengths
/// are known at the transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct StatAllocation<T> {
    pub allocation: PowerAllocation<T>,
    pub mu: T,
    /// Outer water-filling rounds.
    pub iterations: usize,
    pub fixed_point: FixedPointInfo<T>,
}

/// Water-fills unit power over the transmit modes with gains
/// `γ·n_t·σ²_{t,j}·Γ_r`, where `Γ_r` comes from the deterministic equivalent
/// evaluated at the current allocation, and repeats until the allocation is
/// stationary. Each round maximises the deterministic-equivalent capacity
/// over diagonal inputs for fixed `Γ_r`; at low SNR `Γ_r` tends to
/// `mean(σ²_r)`, so the first round is the plain average-gain water-fill.
pub fn stat_csit_allocation<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    tol: T,
    max_iter: usize,
) -> Result<StatAllocation<T>> {
    let st = mv_t.sigma_sq();
    let nt = T::count(st.len());
    let mut powers = vec![T::one() / nt; st.len()];
    let mut last_residual = T::max_value().unwrap();
    for iterations in 1..=max_iter {
        let effective: Vec<T> = st.iter().zip(&powers).map(|(&s, &p)| s * p * nt).collect();
        let fp = solve_fixed_point(&effective, mv_r.sigma_sq(), gamma, tol, DEFAULT_MAX_ITER)?;
        let gains: Vec<T> = st.iter().map(|&s| gamma * nt * s * fp.gamma_r).collect();
        let wf = waterfill(&gains, T::one())?;
        last_residual = wf
            .allocation
            .powers
            .iter()
            .zip(&powers)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        powers = wf.allocation.powers;
        if last_residual < tol {
            let effective: Vec<T> = st.iter().zip(&powers).map(|(&s, &p)| s * p * nt).collect();
            let fixed_point = solve_fixed_point(&effective, mv_r.sigma_sq(), gamma, tol, DEFAULT_MAX_ITER)?;
            return Ok(StatAllocation {
                allocation: PowerAllocation { powers, budget: T::one() },
                mu: wf.mu,
                iterations,
                fixed_point,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last_residual.as_f64(),
    })
}

/// Single water-fill of unit power over the average per-mode gains
/// `γ·σ²_{t,j}·mean(σ²_r)`. This is the first round of
/// [`stat_csit_allocation`] in the low-SNR limit; at moderate SNR it tends to
/// starve weak modes that the receive correlation would still resolve.
pub fn average_gain_allocation<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
) -> Result<WaterFilling<T>> {
    let mean_r = csum(mv_r.sigma_sq().iter().copied()) / T::count(mv_r.len());
    let gains: Vec<T> = mv_t.sigma_sq().iter().map(|&s| gamma * s * mean_r).collect();
    waterfill(&gains, T::one())
}

/// `log₂ det(I + γ H P Hᴴ)` for a diagonal allocation `P`.
pub fn capacity_with_diagonal_input<T: Real>(h: &DMatrix<Complex<T>>, powers: &[T], gamma: T) -> T {
    let mut hp = h.clone();
    for (j, &p) in powers.iter().enumerate() {
        hp.column_mut(j).scale_mut(p.max(T::zero()).sqrt());
    }
    log2_det_identity_plus(&hp, gamma)
}

/// Statistical-CSIT ergodic capacity: the allocation is fixed once from the
/// mode variances, then `log₂ det(I + γ H_a P_a H_aᴴ)` is averaged.
pub fn capacity_stat_csit<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    trials: usize,
    seed: u64,
) -> Result<CapacityReport<T>> {
    check_trials(trials)?;
    let alloc = stat_csit_allocation(mv_t, mv_r, gamma, T::lit(DEFAULT_TOLERANCE), 1000)?;
    let samples = per_trial(trials, |k| {
        Ok(capacity_with_diagonal_input(
            &sample_angular(mv_t, mv_r, seed, k).h,
            &alloc.allocation.powers,
            gamma,
        ))
    })?;
    let mut report = CapacityReport::monte_carlo(Regime::StatCsit, SampleStats::from_samples(&samples));
    report.water_level = Some(alloc.mu);
    report.active_modes = Some(alloc.allocation.active_count());
    Ok(report)
}

/// Per-trial capacities of the three Monte Carlo regimes on shared
/// realisations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTrial<T> {
    pub csir_uniform: T,
    pub stat_csit: T,
    pub perfect_csi: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeComparison<T> {
    pub trials: Vec<PairedTrial<T>>,
    pub csir_uniform: CapacityReport<T>,
    pub stat_csit: CapacityReport<T>,
    pub perfect_csi: CapacityReport<T>,
}

impl<T: Real> RegimeComparison<T> {
    /// Mean and standard error of the paired difference `stat − uniform`.
    pub fn stat_gain(&self) -> SampleStats<T> {
        let d: Vec<T> = self.trials.iter().map(|t| t.stat_csit - t.csir_uniform).collect();
        SampleStats::from_samples(&d)
    }
}

/// Evaluates all three regimes on the same `(seed, trial)` realisations.
pub fn compare_regimes<T: Real>(
    mv_t: &ModeVariances<T>,
    mv_r: &ModeVariances<T>,
    gamma: T,
    trials: usize,
    seed: u64,
) -> Result<RegimeComparison<T>> {
    check_trials(trials)?;
    let alloc = stat_csit_allocation(mv_t, mv_r, gamma, T::lit(DEFAULT_TOLERANCE), 1000)?;
    let nt = T::count(mv_t.len());
    let rows = per_trial(trials, |k| {
        let h = sample_angular(mv_t, mv_r, seed, k).h;
        let eig = gram_eigenvalues(&h);
        let csir_uniform = log2_det_identity_plus(&h, gamma / nt);
        let max = eig.first().copied().unwrap_or_else(T::zero);
        let clean: Vec<T> = eig.iter().map(|&v| if v > max * T::lit(1e-12) { v } else { T::zero() }).collect();
        let wf = waterfill(&clean, gamma)?;
        Ok((
            PairedTrial {
                csir_uniform,
                stat_csit: capacity_with_diagonal_input(&h, &alloc.allocation.powers, gamma),
                perfect_csi: wf.capacity,
            },
            wf.mu,
        ))
    })?;
    let col = |f: fn(&PairedTrial<T>) -> T| SampleStats::from_samples(&rows.iter().map(|(t, _)| f(t)).collect::<Vec<_>>());
    let mut stat_csit = CapacityReport::monte_carlo(Regime::StatCsit, col(|t| t.stat_csit));
    stat_csit.water_level = Some(alloc.mu);
    stat_csit.active_modes = Some(alloc.allocation.active_count());
    let mut perfect_csi = CapacityReport::monte_carlo(Regime::PerfectCsi, col(|t| t.perfect_csi));
    perfect_csi.water_level = Some(SampleStats::from_samples(&rows.iter().map(|(_, mu)| *mu).collect::<Vec<_>>()).mean);
    Ok(RegimeComparison {
        csir_uniform: CapacityReport::monte_carlo(Regime::CsirUniform, col(|t| t.csir_uniform)),
        stat_csit,
        perfect_csi,
        trials: rows.into_iter().map(|(t, _)| t).collect(),
    })
}

/// One uniform-power capacity sample of an `n_r × n_t` i.i.d. Rayleigh
/// channel, `log₂ det(I + (γ/n_t) W Wᴴ)`.
///
/// Uses the bidiagonal model of the complex Gaussian matrix: `W` is unitarily
/// equivalent to a lower-bidiagonal `B` with `d_i² ~ Gamma(n_t − i + 1)` on the
/// diagonal and `e_i² ~ Gamma(n_r − i)` below it (taking `n_r ≥ n_t` by
/// symmetry), so `BᵀB` is tridiagonal and its determinant follows from an
/// `O(n)` LDLᵀ recurrence.
pub fn iid_uniform_capacity_sample<T: Real>(n_r: usize, n_t: usize, gamma: T, seed: u64, trial: u64) -> T {
    let scale = gamma.as_f64() / n_t as f64;
    let (rows, cols) = if n_r >= n_t { (n_r, n_t) } else { (n_t, n_r) };
    let mut stream = GaussianStream::derived(seed, trial, 0x11D);
    let rng = stream.rng_mut();
    let mut draw = |shape: usize| -> f64 {
        if shape == 0 {
            0.0
        } else {
            rng.sample(Gamma::new(shape as f64, 1.0).expect("positive shape"))
        }
    };
    let d2: Vec<f64> = (1..=cols).map(|i| draw(cols - i + 1)).collect();
    let e2: Vec<f64> = (1..=cols).map(|i| draw(rows - i)).collect();
    // M = I + scale·BᵀB, diag: d_i² + e_i², off-diagonal: e_i·d_{i+1}
    let mut terms = Vec::with_capacity(cols);
    let mut pivot = 0.0;
    for i in 0..cols {
        let diag = 1.0 + scale * (d2[i] + e2[i]);
        pivot = if i == 0 {
            diag
        } else {
            let off_sq = scale * scale * e2[i - 1] * d2[i];
            diag - off_sq / pivot
        };
        terms.push(pivot.log2());
    }
    T::lit(csum(terms))
}

/// Ergodic uniform-power capacity of the i.i.d. Rayleigh baseline.
pub fn iid_uniform_ergodic<T: Real>(n_r: usize, n_t: usize, gamma: T, trials: usize, seed: u64) -> Result<CapacityReport<T>> {
    check_trials(trials)?;
    if n_r == 0 || n_t == 0 {
        return Err(Error::InvalidArgument("array sizes must be positive".into()));
    }
    let samples = per_trial(trials, |k| Ok(iid_uniform_capacity_sample::<T>(n_r, n_t, gamma, seed, k)))?;
    Ok(CapacityReport::monte_carlo(Regime::CsirUniform, SampleStats::from_samples(&samples)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{enumerate_modes, Aperture};
    use crate::spectrum::{mode_variances, ScatteringSpec};

    fn iso(side: f64, spacing: f64) -> ModeVariances<f64> {
        let ap = Aperture::square(side, spacing).unwrap();
        mode_variances(&ap, &enumerate_modes(&ap), &ScatteringSpec::isotropic()).unwrap()
    }

    fn diag(values: &[f64]) -> DMatrix<Complex<f64>> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex::new(v, 0.0)),
        ))
    }

    /// 1-D bisection on μ for `Σ[μ − 1/λ]⁺ = budget`, independent of the scan.
    fn bisect_mu(eig: &[f64], budget: f64) -> f64 {
        let pos: Vec<f64> = eig.iter().copied().filter(|&v| v > 0.0).collect();
        let (mut lo, mut hi) = (0.0, budget + pos.iter().map(|v| 1.0 / v).fold(0.0, f64::max) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let used: f64 = pos.iter().map(|v| (mid - 1.0 / v).max(0.0)).sum();
            if used > budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn random_matrix(n_r: usize, n_t: usize, seed: u64) -> DMatrix<Complex<f64>> {
        let mut g = GaussianStream::new(seed, 0);
        DMatrix::from_fn(n_r, n_t, |_, _| g.next_complex())
    }

    #[test]
    fn waterfill_closed_forms() {
        let wf = waterfill::<f64>(&[1.0, 1.0], 2.0).unwrap();
        assert!((wf.mu - 2.0).abs() < 1e-15);
        assert_eq!(wf.allocation.powers, vec![1.0, 1.0]);
        assert!((wf.capacity - 2.0).abs() < 1e-15);

        let wf = waterfill::<f64>(&[1.0, 0.0], 3.0).unwrap();
        assert_eq!(wf.allocation.powers, vec![3.0, 0.0]);
        assert!((wf.capacity - 2.0).abs() < 1e-15);

        let wf = waterfill::<f64>(&[4.0, 1.0], 1.0).unwrap();
        assert!((wf.mu - 1.125).abs() < 1e-15);
        assert!((wf.allocation.powers[0] - 0.875).abs() < 1e-15);
        assert!((wf.allocation.powers[1] - 0.125).abs() < 1e-15);
        let expect = 4.5f64.log2() + 1.125f64.log2();
        assert!((wf.capacity - expect).abs() < 1e-12);
        assert!((wf.capacity - 2.3399).abs() < 1e-4);
        assert!((wf.mu - bisect_mu(&[4.0, 1.0], 1.0)).abs() < 1e-9);
    }

    #[test]
    fn waterfill_kkt_on_random_sets() {
        let mut g = GaussianStream::new(99, 0);
        for case in 0..1000 {
            let n = 1 + (g.uniform() * 40.0) as usize;
            let eig: Vec<f64> = (0..n)
                .map(|_| if g.uniform() < 0.1 { 0.0 } else { (g.uniform() * 8.0 - 4.0).exp() })
                .collect();
            if eig.iter().all(|&v| v == 0.0) {
                continue;
            }
            let budget = (g.uniform() * 8.0 - 3.0).exp();
            let wf = waterfill::<f64>(&eig, budget).unwrap();
            let used: f64 = wf.allocation.powers.iter().sum();
            assert!((used - budget).abs() <= 1e-9 * budget.max(1.0), "case {case}");
            for (p, l) in wf.allocation.powers.iter().zip(&eig) {
                if *p > 0.0 {
                    assert!(wf.mu - 1.0 / l > 0.0);
                } else if *l > 0.0 {
                    assert!(wf.mu <= 1.0 / l + 1e-12);
                }
            }
            let mu = bisect_mu(&eig, budget);
            assert!((wf.mu - mu).abs() <= 1e-9 * mu.max(1.0), "case {case}: {} {}", wf.mu, mu);
        }
    }

    #[test]
    fn average_gain_matches_first_round_at_low_snr() {
        let mv = iso(2.0, 0.25);
        let a = average_gain_allocation(&mv, &mv, 1e-3).unwrap();
        let b = stat_csit_allocation(&mv, &mv, 1e-3, 1e-12, 1000).unwrap();
        for (x, y) in a.allocation.powers.iter().zip(&b.allocation.powers) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn waterfill_drops_weak_modes() {
        let wf = waterfill::<f64>(&[10.0, 0.01], 1.0).unwrap();
        assert_eq!(wf.allocation.powers[1], 0.0);
        assert!((wf.mu - 1.1).abs() < 1e-12);
        assert!(wf.mu <= 1.0 / 0.01);
    }

    #[test]
    fn waterfill_errors() {
        assert_eq!(waterfill(&[0.0, 0.0], 1.0), Err(Error::RankZero));
        assert!(waterfill::<f64>(&[], 1.0).is_err());
        assert!(waterfill(&[1.0], 0.0).is_err());
        assert!(waterfill(&[-1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn gram_matches_complex_product() {
        for (r, c) in [(3usize, 5usize), (5, 3), (4, 4)] {
            let h = random_matrix(r, c, (r * 10 + c) as u64);
            let direct = if r <= c { &h * h.adjoint() } else { h.adjoint() * &h };
            assert!((gram(&h) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_channel() {
        let h = diag(&[1.0]);
        let c = capacity_csir_uniform(&h, 10.0);
        assert!((c - 11f64.log2()).abs() < 1e-12);
        assert!((c - 3.4594).abs() < 1e-4);
        let p = capacity_perfect_csi(&h, 10.0).unwrap();
        assert!((p.capacity - c).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_uniform() {
        let c = capacity_csir_uniform(&diag(&[1.0; 4]), 10.0);
        assert!((c - 4.0 * 3.5f64.log2()).abs() < 1e-12);
        assert!((c - 7.2294).abs() < 1e-4);
    }

    #[test]
    fn uniform_matches_log_det() {
        for seed in 0..5 {
            let h = random_matrix(3, 3, seed);
            let c = capacity_csir_uniform(&h, 10.0);
            // log₂ det via LU of I + (γ/n_t) H Hᴴ
            let m = DMatrix::<Complex<f64>>::identity(3, 3) + (&h * h.adjoint()).map(|z| z * (10.0 / 3.0));
            let det = m.determinant();
            assert!((c - det.re.log2()).abs() < 1e-10);
            let eig_route: f64 = gram_eigenvalues(&h).iter().map(|v| (1.0 + v * 10.0 / 3.0).log2()).sum();
            assert!((c - eig_route).abs() < 1e-10);
        }
    }

    #[test]
    fn perfect_csi_beats_grid_search() {
        // Brute force over allocations diagonal in V on a 1e-3 simplex grid
        // restricted to the two strongest modes plus the remainder split evenly.
        let h = random_matrix(4, 4, 17);
        let gamma = 10.0;
        let eig = gram_eigenvalues(&h);
        let best = capacity_perfect_csi(&h, gamma).unwrap().capacity;
        let mut grid_best = f64::MIN;
        let steps = 1000;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let rest = (steps - a - b) as f64 / steps as f64;
                for c in 0..=20 {
                    let pc = rest * c as f64 / 20.0;
                    let p = [a as f64 / steps as f64, b as f64 / steps as f64, pc, rest - pc];
                    let cap: f64 = eig.iter().zip(&p).map(|(l, p)| (1.0 + gamma * p * l).log2()).sum();
                    grid_best = grid_best.max(cap);
                }
            }
        }
        assert!(best >= grid_best - 1e-9);
        assert!(best - grid_best < 5e-3, "{best} {grid_best}");
        let q = transmit_covariance(&h, gamma).unwrap();
        assert!((q.trace().re - 1.0).abs() < 1e-12);
        let direct = log2_det_identity_plus(&(&h * q.map(|z| z * gamma).cholesky().unwrap().l()), 1.0);
        assert!((direct - best).abs() < 1e-9);
    }

    #[test]
    fn covariance_of_wide_channel_has_transmit_dimension() {
        let h = random_matrix(2, 5, 41);
        let q = transmit_covariance(&h, 10.0).unwrap();
        assert_eq!(q.shape(), (5, 5));
        assert!((q.trace().re - 1.0).abs() < 1e-12);
        // Q is rank two here, so take its square root from the eigenvectors.
        let e = SymmetricEigen::new(q.clone());
        let root = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(|v| Complex::new(v.max(0.0).sqrt(), 0.0)));
        let achieved = log2_det_identity_plus(&(&h * root), 10.0);
        assert!((achieved - capacity_perfect_csi(&h, 10.0).unwrap().capacity).abs() < 1e-9);
    }

    #[test]
    fn perfect_dominates_uniform_per_realisation() {
        let mv = iso(2.0, 0.25);
        for k in 0..200 {
            let h = sample_angular(&mv, &mv, 4, k).h;
            for gamma in [0.1, 1.0, 10.0, 100.0] {
                let u = capacity_csir_uniform(&h, gamma);
                let p = capacity_perfect_csi(&h, gamma).unwrap().capacity;
                assert!(p >= u - 1e-9);
            }
        }
    }

    #[test]
    fn capacities_increase_with_snr() {
        let mv = iso(2.0, 0.5);
        let h = sample_angular(&mv, &mv, 9, 0).h;
        let grid = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
        let mut prev = (-1.0, -1.0, -1.0);
        for g in grid {
            let cur = (
                capacity_csir_uniform(&h, g),
                capacity_perfect_csi(&h, g).unwrap().capacity,
                capacity_asymptotic(&mv, &mv, g, 1e-12, DEFAULT_MAX_ITER).unwrap().capacity,
            );
            assert!(cur.0 > prev.0 && cur.1 > prev.1 && cur.2 > prev.2);
            prev = cur;
        }
    }

    #[test]
    fn uniform_capacity_is_rotation_invariant() {
        let h = random_matrix(4, 3, 23);
        let (u, _) = random_matrix(4, 4, 24).qr().unpack();
        let (v, _) = random_matrix(3, 3, 25).qr().unpack();
        let rotated = &u * &h * v.adjoint();
        assert!((capacity_csir_uniform(&h, 5.0) - capacity_csir_uniform(&rotated, 5.0)).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let mv = iso(4.0, 0.5);
        let report = capacity_asymptotic(&mv, &mv, 10.0, 1e-10, DEFAULT_MAX_ITER).unwrap();
        let fp = report.fixed_point.unwrap();
        let s = mv.sigma_sq();
        let nt = s.len() as f64;
        let gt: f64 = s.iter().map(|&x| x / (1.0 + 10.0 * x * fp.gamma_r)).sum::<f64>() / nt;
        let gr: f64 = s.iter().map(|&x| x / (1.0 + 10.0 * x * fp.gamma_t)).sum::<f64>() / nt;
        assert!((gt - fp.gamma_t).abs() < 1e-10);
        assert!((gr - fp.gamma_r).abs() < 1e-10);
        assert!(fp.residual < 1e-10);
    }

    #[test]
    fn fixed_point_reports_non_convergence() {
        let mv = iso(4.0, 0.5);
        match capacity_asymptotic(&mv, &mv, 10.0, 1e-14, 3) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(capacity_asymptotic(&mv, &mv, 10.0, 0.0, 10).is_err());
    }

    #[test]
    fn stat_allocation_low_snr_equal_variances_is_uniform() {
        let mv = ModeVariances::<f64>::unit(9);
        let a = stat_csit_allocation(&mv, &mv, 1e-6, 1e-12, 100).unwrap();
        for p in &a.allocation.powers {
            assert!((p - 1.0 / 9.0).abs() <= 1e-6);
        }
        assert!((a.allocation.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stat_allocation_single_transmit_mode() {
        let ap = Aperture::square(1.0, 0.5).unwrap();
        let one = crate::geometry::ModeSet::from_raw(ap, vec![crate::geometry::ModeIndex::new(0, 0)]);
        let mt = ModeVariances::from_weights(one, vec![1.0], 4.0).unwrap();
        let mr = iso(1.0, 0.5);
        let a = stat_csit_allocation(&mt, &mr, 10.0, 1e-12, 100).unwrap();
        assert!((a.allocation.powers[0] - 1.0).abs() < 1e-12);
        let stat = capacity_stat_csit(&mt, &mr, 10.0, 50, 3).unwrap();
        let unif = capacity_csir_uniform_ergodic(&mt, &mr, 10.0, 50, 3).unwrap();
        assert!((stat.capacity - unif.capacity).abs() < 1e-10);
    }

    #[test]
    fn stat_csit_between_uniform_and_perfect() {
        let mv = iso(2.0, 0.5);
        let cmp = compare_regimes(&mv, &mv, 10.0, 2000, 31).unwrap();
        assert!(cmp.perfect_csi.capacity > cmp.stat_csit.capacity);
        let gain = cmp.stat_gain();
        assert!(gain.mean > 3.0 * gain.stderr, "{gain:?}");
        for t in &cmp.trials {
            assert!(t.perfect_csi >= t.stat_csit - 1e-9);
            assert!(t.perfect_csi >= t.csir_uniform - 1e-9);
        }
        let standalone = capacity_stat_csit(&mv, &mv, 10.0, 2000, 31).unwrap();
        assert_eq!(standalone.capacity, cmp.stat_csit.capacity);
    }

    #[test]
    fn average_gain_rule_loses_to_uniform_at_half_wavelength() {
        let mv = iso(2.0, 0.5);
        let avg = average_gain_allocation(&mv, &mv, 10.0).unwrap();
        let opt = stat_csit_allocation(&mv, &mv, 10.0, 1e-12, 1000).unwrap();
        let d: Vec<(f64, f64)> = (0..4000)
            .map(|k| {
                let h = sample_angular(&mv, &mv, 8, k).h;
                let u = capacity_csir_uniform(&h, 10.0);
                (
                    capacity_with_diagonal_input(&h, &avg.allocation.powers, 10.0) - u,
                    capacity_with_diagonal_input(&h, &opt.allocation.powers, 10.0) - u,
                )
            })
            .collect();
        let avg_gain = SampleStats::from_samples(&d.iter().map(|x| x.0).collect::<Vec<_>>());
        let opt_gain = SampleStats::from_samples(&d.iter().map(|x| x.1).collect::<Vec<_>>());
        assert!(avg_gain.mean < -3.0 * avg_gain.stderr, "{avg_gain:?}");
        assert!(opt_gain.mean > 3.0 * opt_gain.stderr, "{opt_gain:?}");
    }

    #[test]
    fn stderr_scales_with_trials() {
        let mv = iso(2.0, 0.5);
        let a = capacity_csir_uniform_ergodic(&mv, &mv, 10.0, 100, 1).unwrap();
        let b = capacity_csir_uniform_ergodic(&mv, &mv, 10.0, 1000, 2).unwrap();
        let ratio = a.stderr / b.stderr;
        let expect = 10f64.sqrt();
        assert!(ratio > expect / 2.0 && ratio < expect * 2.0, "{ratio}");
    }

    #[test]
    fn bidiagonal_iid_sampler_matches_dense_sampling() {
        for (n_r, n_t) in [(6usize, 6usize), (8, 3), (3, 8)] {
            let trials = 20_000;
            let fast = iid_uniform_ergodic::<f64>(n_r, n_t, 10.0, trials, 5).unwrap();
            let mv_t = ModeVariances::<f64>::unit(n_t);
            let mv_r = ModeVariances::<f64>::unit(n_r);
            let dense = capacity_csir_uniform_ergodic(&mv_t, &mv_r, 10.0, trials, 6).unwrap();
            let se = (fast.stderr.powi(2) + dense.stderr.powi(2)).sqrt();
            assert!((fast.capacity - dense.capacity).abs() < 4.0 * se, "{n_r}x{n_t}: {} vs {}", fast.capacity, dense.capacity);
            assert!((fast.stderr / dense.stderr - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn single_precision_pipeline() {
        let ap = Aperture::<f32>::square(2.0, 0.5).unwrap();
        let mv = mode_variances(&ap, &enumerate_modes(&ap), &ScatteringSpec::isotropic()).unwrap();
        let h = sample_angular(&mv, &mv, 1, 0).h;
        let u = capacity_csir_uniform(&h, 10.0f32);
        let p = capacity_perfect_csi(&h, 10.0f32).unwrap().capacity;
        assert!(u.is_finite() && p >= u - 1e-3);
        let de = capacity_asymptotic(&mv, &mv, 10.0f32, 1e-5, DEFAULT_MAX_ITER).unwrap();
        assert!((de.capacity - u).abs() / u < 0.1);
    }
}
