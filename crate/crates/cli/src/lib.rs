//! Front end of the `hmimo` binary. [`run`] maps arguments to an exit code:
//! 0 on success, 1 on usage or input errors, 2 on numerical failures.

pub mod args;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use hmimo_core::analysis::ArrayGeometry;
use hmimo_core::harness::{commensurate_spacing, parse_sweep, run_experiment, CorrelationKind, ExperimentSpec, SweepRegime};
use hmimo_core::multiuser::{LisConfig, UserLink};
use hmimo_core::spectrum::ScatteringSpec;

use args::{Cli, Command};
use config::{RunConfig, SEED_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<hmimo_core::Error> for Failure {
    fn from(e: hmimo_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn scattering(cfg: &RunConfig) -> Result<ScatteringSpec<f64>, Failure> {
    let spec = match cfg.spectrum.as_str() {
        "isotropic" => ScatteringSpec::isotropic(),
        "directional" => ScatteringSpec::directional(cfg.azimuth.to_radians(), cfg.elevation.to_radians(), cfg.kappa),
        other => return Err(usage(format!("unknown spectrum `{other}` (expected isotropic or directional)"))),
    };
    Ok(spec.with_resolution(cfg.resolution))
}

fn parse_users(text: &str) -> Result<Vec<UserLink<f64>>, Failure> {
    text.split(',')
        .enumerate()
        .map(|(k, entry)| {
            let parts: Vec<&str> = entry.trim().split(':').collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(usage(format!("user `{entry}` is not power:pathloss[:label]")));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("user `{entry}`: `{s}` is not a number")))
            };
            let label = parts.get(2).map(|s| s.trim().to_owned()).unwrap_or_else(|| (k + 1).to_string());
            if label == "total" {
                return Err(usage("`total` is reserved for the sum row"));
            }
            Ok(UserLink::new(num(parts[0])?, num(parts[1])?, label)?)
        })
        .collect()
}

/// Experiment described by a subcommand and a resolved configuration.
pub fn experiment(command: Command, cfg: &RunConfig) -> Result<ExperimentSpec, String> {
    build(command, cfg).map_err(|f| match f {
        Failure::Usage(m) | Failure::Numerical(m) => m,
    })
}

fn build(command: Command, cfg: &RunConfig) -> Result<ExperimentSpec, Failure> {
    Ok(match command {
        Command::Dof => {
            let (geometry, extent) = match cfg.geometry.as_str() {
                "planar" => (ArrayGeometry::Planar, cfg.area),
                "linear" => (ArrayGeometry::Linear, cfg.length),
                other => return Err(usage(format!("unknown geometry `{other}` (expected linear or planar)"))),
            };
            ExperimentSpec::Dof {
                geometry,
                wavelength: cfg.wavelength,
                extent,
            }
        }
        Command::Eigs => ExperimentSpec::EigSpectrum {
            side: cfg.side,
            spacing: cfg.spacing,
            scattering: scattering(cfg)?,
            model: cfg.model.parse::<CorrelationKind>()?,
        },
        Command::Capacity => {
            let spacings = match &cfg.spacing_sweep {
                Some(s) => parse_sweep(s)?,
                None => vec![cfg.spacing],
            };
            let regimes = cfg
                .regimes
                .split(',')
                .map(|r| r.trim().parse::<SweepRegime>())
                .collect::<Result<Vec<_>, _>>()?;
            ExperimentSpec::CapacitySweep {
                side: cfg.side,
                spacings,
                scattering: scattering(cfg)?,
                snr_db: cfg.snr_db,
                trials: cfg.trials,
                seed: cfg.seed(),
                regimes,
            }
        }
        Command::Compare => ExperimentSpec::RegimeCompare {
            side: cfg.side,
            spacing: cfg.spacing,
            scattering: scattering(cfg)?,
            snr_db: cfg.snr_db,
            trials: cfg.trials,
            seed: cfg.seed(),
        },
        Command::Sumrate => ExperimentSpec::Sumrate {
            users: parse_users(&cfg.users)?,
            lis: LisConfig::new(cfg.radius, cfg.noise)?,
        },
    })
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // A second initialisation (tests calling `run` repeatedly) is harmless.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    log::set_max_level(level);
}

fn execute(command: Command, cfg: &RunConfig) -> Result<(), Failure> {
    let spec = build(command, cfg)?;
    if let ExperimentSpec::CapacitySweep { side, spacings, .. } = &spec {
        for &s in spacings {
            let realised = commensurate_spacing(*side, s)?;
            if realised != s {
                log::info!("spacing {s} snapped to {realised} so that it tiles L = {side}");
            }
        }
    }
    log::debug!("{spec:?}");
    let started = Instant::now();
    let tables = match cfg.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| usage(e.to_string()))?
            .install(|| run_experiment(&spec))?,
        None => run_experiment(&spec)?,
    };
    log::info!("{} finished in {:.2?}", command_name(command), started.elapsed());
    let bytes = output::render(&tables, cfg.format);
    match &cfg.out {
        Some(path) => output::write_atomic(Path::new(path), &bytes).map_err(|e| usage(format!("cannot write {path}: {e}")))?,
        None => std::io::stdout()
            .lock()
            .write_all(&bytes)
            .map_err(|e| usage(format!("cannot write to standard output: {e}")))?,
    }
    Ok(())
}

fn command_name(command: Command) -> &'static str {
    match command {
        Command::Dof => "dof",
        Command::Eigs => "eigs",
        Command::Capacity => "capacity",
        Command::Sumrate => "sumrate",
        Command::Compare => "compare",
    }
}

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let file = match cli.config.as_deref().map(RunConfig::load).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = match RunConfig::resolve(file, &cli.overrides, env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    init_logging(cfg.verbose);
    if cli.dump_config {
        let mut dumped = cfg.clone();
        dumped.seed = Some(cfg.seed());
        print!("{}", dumped.to_toml());
        return EXIT_OK;
    }
    match execute(cli.command, &cfg) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            EXIT_NUMERICAL
        }
    }
}
