//! Seeded experiment orchestration. Every experiment is a pure function of
//! its [`ExperimentSpec`]: trials and sweep points may run on any number of
//! threads, but rows come back in canonical order and every reduction is
//! accumulated in trial order.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{dof_limit, eigen_spectrum, eigen_spectrum_dense, evanescent_loss, ArrayGeometry, EigenReport};
use crate::capacity::{
    capacity_asymptotic, capacity_csir_uniform_ergodic, compare_regimes, iid_uniform_ergodic, SnrSpec, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use crate::channel::{exact_correlation, CorrelationModel, Side};
use crate::error::{Error, Result};
use crate::geometry::{enumerate_modes, Aperture};
use crate::multiuser::{lis_sum_rate, LisConfig, UserLink};
use crate::spectrum::{mode_variances, ModeVariances, ScatteringSpec};

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

/// Largest sweep spacing in wavelengths, with slack for decimal input.
const MAX_SWEEP_SPACING: f64 = 0.5 + 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric value at `(row, column)`; integers are widened.
    pub fn num(&self, row: usize, column: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(column)?)? {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn text(&self, row: usize, column: &str) -> Option<&str> {
        match self.rows.get(row)?.get(self.column(column)?)? {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Correlation model behind an eigen-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    /// Finite plane-wave (lattice) expansion `Φ diag(σ²) Φᴴ`.
    #[default]
    PlaneWave,
    /// Dense kernel of the continuous scattering field.
    Exact,
}

impl CorrelationKind {
    pub fn label(&self) -> &'static str {
        match self {
            CorrelationKind::PlaneWave => "plane-wave",
            CorrelationKind::Exact => "exact",
        }
    }
}

impl FromStr for CorrelationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane-wave" => Ok(CorrelationKind::PlaneWave),
            "exact" => Ok(CorrelationKind::Exact),
            _ => Err(Error::InvalidArgument(format!("unknown correlation model `{s}`"))),
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rows of a capacity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepRegime {
    /// Uncorrelated `N × N` Rayleigh channel with uniform power.
    IidUniform,
    CsirUniform,
    StatCsit,
    PerfectCsi,
    Asymptotic,
}

impl SweepRegime {
    pub const ALL: [SweepRegime; 5] = [
        SweepRegime::IidUniform,
        SweepRegime::CsirUniform,
        SweepRegime::StatCsit,
        SweepRegime::PerfectCsi,
        SweepRegime::Asymptotic,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SweepRegime::IidUniform => "iid-uniform",
            SweepRegime::CsirUniform => "csir-uniform",
            SweepRegime::StatCsit => "stat-csit",
            SweepRegime::PerfectCsi => "perfect-csi",
            SweepRegime::Asymptotic => "asymptotic",
        }
    }
}

impl FromStr for SweepRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepRegime::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown regime `{s}`")))
    }
}

impl fmt::Display for SweepRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Dof {
        geometry: ArrayGeometry,
        wavelength: f64,
        /// Length for linear arrays, area for planar ones.
        extent: f64,
    },
    EigSpectrum {
        side: f64,
        spacing: f64,
        scattering: ScatteringSpec<f64>,
        model: CorrelationKind,
    },
    CapacitySweep {
        side: f64,
        spacings: Vec<f64>,
        scattering: ScatteringSpec<f64>,
        snr_db: f64,
        trials: usize,
        seed: u64,
        regimes: Vec<SweepRegime>,
    },
    RegimeCompare {
        side: f64,
        spacing: f64,
        scattering: ScatteringSpec<f64>,
        snr_db: f64,
        trials: usize,
        seed: u64,
    },
    Sumrate {
        users: Vec<UserLink<f64>>,
        lis: LisConfig<f64>,
    },
}

pub fn validate(spec: &ExperimentSpec) -> Result<()> {
    let trials_ok = |t: usize| {
        if t == 0 {
            Err(Error::InvalidArgument("trials must be at least 1".into()))
        } else {
            Ok(())
        }
    };
    match spec {
        ExperimentSpec::Dof { .. } => Ok(()),
        ExperimentSpec::EigSpectrum { scattering, .. } => scattering.validate(),
        ExperimentSpec::CapacitySweep {
            spacings,
            scattering,
            trials,
            regimes,
            ..
        } => {
            trials_ok(*trials)?;
            scattering.validate()?;
            if spacings.is_empty() {
                return Err(Error::InvalidArgument("spacing list is empty".into()));
            }
            if regimes.is_empty() {
                return Err(Error::InvalidArgument("no regimes selected".into()));
            }
            if let Some(s) = spacings.iter().find(|s| !(**s > 0.0 && **s <= MAX_SWEEP_SPACING)) {
                return Err(Error::InvalidArgument(format!("sweep spacing {s} outside (0, 0.5]")));
            }
            Ok(())
        }
        ExperimentSpec::RegimeCompare { trials, scattering, .. } => {
            trials_ok(*trials)?;
            scattering.validate()
        }
        ExperimentSpec::Sumrate { users, .. } => {
            if users.is_empty() {
                Err(Error::InvalidArgument("at least one user is required".into()))
            } else {
                Ok(())
            }
        }
    }
}

/// Snaps a requested spacing to the nearest one that tiles the side exactly,
/// `L / round(L / s)`.
pub fn commensurate_spacing(side: f64, spacing: f64) -> Result<f64> {
    if !(side > 0.0 && spacing > 0.0 && side.is_finite() && spacing.is_finite()) {
        return Err(Error::InvalidAperture("side and spacing must be positive".into()));
    }
    let n = (side / spacing).round().max(1.0);
    Ok(side / n)
}

/// `a:b:k` → `k` evenly spaced values from `a` to `b` inclusive.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("sweep `{text}` is not of the form start:stop:count"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let k: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match k {
        0 => Err(bad()),
        1 if a == b => Ok(vec![a]),
        1 => Err(bad()),
        _ => Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()),
    }
}

fn isotropic_variances(aperture: &Aperture<f64>, scattering: &ScatteringSpec<f64>) -> Result<ModeVariances<f64>> {
    mode_variances(aperture, &enumerate_modes(aperture), scattering)
}

/// Eigen-spectrum of the receive correlation for a square aperture.
pub fn spectrum_report(
    side: f64,
    spacing: f64,
    scattering: &ScatteringSpec<f64>,
    model: CorrelationKind,
) -> Result<EigenReport<f64>> {
    let aperture = Aperture::square(side, spacing)?;
    match model {
        CorrelationKind::PlaneWave => {
            let mv = isotropic_variances(&aperture, scattering)?;
            Ok(eigen_spectrum(&CorrelationModel::new(&aperture, mv, Side::Receive)?))
        }
        CorrelationKind::Exact => eigen_spectrum_dense(&exact_correlation(&aperture, scattering)?),
    }
}

fn capacity_row(spacing: f64, regime: &str, capacity: f64, stderr: f64, trials: usize, seed: u64) -> Vec<Cell> {
    vec![
        spacing.into(),
        regime.into(),
        capacity.into(),
        stderr.into(),
        trials.into(),
        seed.into(),
    ]
}

const CAPACITY_COLUMNS: [&str; 6] = ["spacing", "regime", "capacity_bits", "stderr", "trials", "seed"];

fn sweep_point(
    side: f64,
    requested: f64,
    scattering: &ScatteringSpec<f64>,
    gamma: f64,
    trials: usize,
    seed: u64,
    regimes: &[SweepRegime],
) -> Result<Vec<Vec<Cell>>> {
    let spacing = commensurate_spacing(side, requested)?;
    let at = |e: Error| Error::AtSweepPoint {
        spacing,
        source: Box::new(e),
    };
    let aperture = Aperture::square(side, spacing).map_err(at)?;
    let mv = isotropic_variances(&aperture, scattering).map_err(at)?;
    let wants = |r: SweepRegime| regimes.contains(&r);
    // The paired run shares realisations between regimes; uniform power on
    // its own needs no eigendecomposition.
    let paired = if wants(SweepRegime::StatCsit) || wants(SweepRegime::PerfectCsi) {
        Some(compare_regimes(&mv, &mv, gamma, trials, seed).map_err(at)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(regimes.len());
    for &regime in regimes {
        let row = match regime {
            SweepRegime::IidUniform => {
                let n = aperture.element_count();
                let r = iid_uniform_ergodic(n, n, gamma, trials, seed).map_err(at)?;
                capacity_row(spacing, regime.label(), r.capacity, r.stderr, trials, seed)
            }
            SweepRegime::Asymptotic => {
                let r = capacity_asymptotic(&mv, &mv, gamma, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).map_err(at)?;
                capacity_row(spacing, regime.label(), r.capacity, 0.0, 0, seed)
            }
            SweepRegime::CsirUniform if paired.is_none() => {
                let r = capacity_csir_uniform_ergodic(&mv, &mv, gamma, trials, seed).map_err(at)?;
                capacity_row(spacing, regime.label(), r.capacity, r.stderr, trials, seed)
            }
            SweepRegime::CsirUniform | SweepRegime::StatCsit | SweepRegime::PerfectCsi => {
                let cmp = paired.as_ref().expect("paired regimes evaluated");
                let r = match regime {
                    SweepRegime::CsirUniform => &cmp.csir_uniform,
                    SweepRegime::StatCsit => &cmp.stat_csit,
                    _ => &cmp.perfect_csi,
                };
                capacity_row(spacing, regime.label(), r.capacity, r.stderr, trials, seed)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs one experiment. Returns one or more tables; the first is the primary
/// result.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Table>> {
    validate(spec)?;
    match spec {
        ExperimentSpec::Dof {
            geometry,
            wavelength,
            extent,
        } => {
            let mut t = Table::new("dof", &["geometry", "wavelength", "extent", "dof_limit", "evanescent_loss"]);
            let name = match geometry {
                ArrayGeometry::Linear => "linear",
                ArrayGeometry::Planar => "planar",
            };
            t.push(vec![
                name.into(),
                (*wavelength).into(),
                (*extent).into(),
                dof_limit(*geometry, *wavelength, *extent)?.into(),
                evanescent_loss::<f64>().into(),
            ]);
            Ok(vec![t])
        }
        ExperimentSpec::EigSpectrum {
            side,
            spacing,
            scattering,
            model,
        } => {
            let report = spectrum_report(*side, *spacing, scattering, *model)?;
            let mut t = Table::new("eigenvalues", &["index", "eigenvalue", "cumulative_fraction"]);
            for (k, (v, c)) in report.eigenvalues().iter().zip(report.cumulative_fractions()).enumerate() {
                t.push(vec![(k + 1).into(), (*v).into(), c.into()]);
            }
            Ok(vec![t])
        }
        ExperimentSpec::CapacitySweep {
            side,
            spacings,
            scattering,
            snr_db,
            trials,
            seed,
            regimes,
        } => {
            let gamma = SnrSpec::from_db(*snr_db)?.gamma();
            let mut t = Table::new("capacity", &CAPACITY_COLUMNS);
            // Sweep points run one after another; each already saturates the
            // pool through its trials.
            for &s in spacings {
                for row in sweep_point(*side, s, scattering, gamma, *trials, *seed, regimes)? {
                    t.push(row);
                }
            }
            Ok(vec![t])
        }
        ExperimentSpec::RegimeCompare {
            side,
            spacing,
            scattering,
            snr_db,
            trials,
            seed,
        } => {
            let gamma = SnrSpec::from_db(*snr_db)?.gamma();
            let realised = commensurate_spacing(*side, *spacing)?;
            let at = |e: Error| Error::AtSweepPoint {
                spacing: realised,
                source: Box::new(e),
            };
            let aperture = Aperture::square(*side, realised).map_err(at)?;
            let mv = isotropic_variances(&aperture, scattering).map_err(at)?;
            let cmp = compare_regimes(&mv, &mv, gamma, *trials, *seed).map_err(at)?;
            let mut summary = Table::new("capacity", &CAPACITY_COLUMNS);
            for r in [&cmp.csir_uniform, &cmp.stat_csit, &cmp.perfect_csi] {
                summary.push(capacity_row(realised, r.regime.label(), r.capacity, r.stderr, *trials, *seed));
            }
            let mut per_trial = Table::new("trials", &["trial", "csir_uniform", "stat_csit", "perfect_csi"]);
            for (k, row) in cmp.trials.iter().enumerate() {
                per_trial.push(vec![
                    k.into(),
                    row.csir_uniform.into(),
                    row.stat_csit.into(),
                    row.perfect_csi.into(),
                ]);
            }
            Ok(vec![summary, per_trial])
        }
        ExperimentSpec::Sumrate { users, lis } => {
            let rate = lis_sum_rate(users, lis)?;
            let mut t = Table::new("sumrate", &["user", "term_bits"]);
            for (u, term) in users.iter().zip(&rate.terms) {
                t.push(vec![u.label.clone().into(), (*term).into()]);
            }
            t.push(vec!["total".into(), rate.total.into()]);
            Ok(vec![t])
        }
    }
}
