use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::config::{Format, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "hmimo",
    version,
    about = "Holographic MIMO channel statistics: degrees of freedom, eigen-spectra, capacity",
    after_help = "Flags override values from --config; the seed falls back to the HMIMO_SEED environment variable, then to 1."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub overrides: Overrides,

    /// Flat TOML file with any of the flag names (snake_case) as keys [default: none]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as TOML and exit [default: off]
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Degrees-of-freedom limit of a linear or planar aperture
    Dof,
    /// Eigenvalues of the receive spatial correlation
    Eigs,
    /// Ergodic capacity versus element spacing
    Capacity,
    /// Closed-form uplink sum rate into a circular LIS
    Sumrate,
    /// Paired comparison of the CSI regimes at one spacing
    Compare,
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    /// Aperture side length in wavelengths [default: 10]
    #[arg(long = "L", alias = "side", global = true, value_name = "WAVELENGTHS")]
    pub side: Option<f64>,

    /// Element spacing in wavelengths [default: 0.5]
    #[arg(long, global = true, value_name = "WAVELENGTHS")]
    pub spacing: Option<f64>,

    /// Spacing sweep start:stop:count for `capacity`; spacings are snapped to L/round(L/s) [default: the single --spacing]
    #[arg(long, global = true, value_name = "A:B:K")]
    pub spacing_sweep: Option<String>,

    /// Receive SNR in dB [default: 10]
    #[arg(long, global = true, value_name = "DB", allow_negative_numbers = true)]
    pub snr_db: Option<f64>,

    /// Monte Carlo trials per sweep point [default: 200]
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// RNG seed [default: $HMIMO_SEED, else 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Scattering spectrum: isotropic | directional [default: isotropic]
    #[arg(long, global = true, value_name = "KIND")]
    pub spectrum: Option<String>,

    /// Concentration of the directional lobe [default: 4]
    #[arg(long, global = true)]
    pub kappa: Option<f64>,

    /// Lobe azimuth in degrees from the x axis [default: 0]
    #[arg(long, global = true, value_name = "DEG", allow_negative_numbers = true)]
    pub azimuth: Option<f64>,

    /// Lobe elevation in degrees above the array plane [default: 0]
    #[arg(long, global = true, value_name = "DEG", allow_negative_numbers = true)]
    pub elevation: Option<f64>,

    /// Quadrature subdivisions per mode cell and axis [default: 32]
    #[arg(long, global = true)]
    pub resolution: Option<usize>,

    /// Correlation model for `eigs`: plane-wave | exact [default: plane-wave]
    #[arg(long, global = true, value_name = "MODEL")]
    pub model: Option<String>,

    /// Comma-separated regimes for `capacity`: iid-uniform, csir-uniform, stat-csit, perfect-csi, asymptotic [default: all]
    #[arg(long, global = true, value_name = "LIST")]
    pub regimes: Option<String>,

    /// Array geometry for `dof`: linear | planar [default: planar]
    #[arg(long, global = true)]
    pub geometry: Option<String>,

    /// Wavelength in metres for `dof` [default: 0.1]
    #[arg(long, global = true, value_name = "M")]
    pub wavelength: Option<f64>,

    /// Planar aperture area in square metres for `dof` [default: 1]
    #[arg(long, global = true, value_name = "M2")]
    pub area: Option<f64>,

    /// Linear aperture length in metres for `dof` [default: 1]
    #[arg(long, global = true, value_name = "M")]
    pub length: Option<f64>,

    /// Users for `sumrate` as power:pathloss[:label],... [default: 1:1]
    #[arg(long, global = true, value_name = "LIST")]
    pub users: Option<String>,

    /// LIS radius in metres for `sumrate` [default: 1]
    #[arg(long, global = true, value_name = "M")]
    pub radius: Option<f64>,

    /// Noise power in watts for `sumrate` [default: 1]
    #[arg(long, global = true, value_name = "W")]
    pub noise: Option<f64>,

    /// Output format [default: csv]
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,

    /// Output file, written atomically [default: standard output]
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,

    /// Worker threads; results do not depend on it [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More diagnostics on standard error, repeatable [default: quiet]
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                })*
            };
        }
        set!(side, spacing, snr_db, trials, spectrum, kappa, azimuth, elevation, resolution, model, regimes);
        set!(geometry, wavelength, area, length, users, radius, noise);
        if self.spacing_sweep.is_some() {
            cfg.spacing_sweep = self.spacing_sweep.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(f) = self.format {
            cfg.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        if self.verbose > 0 {
            cfg.verbose = self.verbose;
        }
    }
}
