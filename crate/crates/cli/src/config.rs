//! Run configuration: built-in defaults, overlaid by a flat TOML file,
//! overlaid by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::Overrides;

pub const SEED_ENV: &str = "HMIMO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every key has a default; unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Aperture side in wavelengths.
    pub side: f64,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    /// `start:stop:count`; overrides `spacing` for `capacity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_sweep: Option<String>,
    pub snr_db: f64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `isotropic` or `directional`.
    pub spectrum: String,
    pub kappa: f64,
    /// Degrees from the x axis.
    pub azimuth: f64,
    /// Degrees above the array plane.
    pub elevation: f64,
    pub resolution: usize,
    /// `plane-wave` or `exact`.
    pub model: String,
    /// Comma-separated sweep regimes.
    pub regimes: String,
    /// `linear` or `planar`.
    pub geometry: String,
    /// Metres.
    pub wavelength: f64,
    /// Square metres, planar arrays.
    pub area: f64,
    /// Metres, linear arrays.
    pub length: f64,
    /// Comma-separated `power:pathloss[:label]` entries.
    pub users: String,
    /// LIS radius in metres.
    pub radius: f64,
    /// Noise power in watts.
    pub noise: f64,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub verbose: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            side: 10.0,
            spacing: 0.5,
            spacing_sweep: None,
            snr_db: 10.0,
            trials: hmimo_core::harness::DEFAULT_TRIALS,
            seed: None,
            spectrum: "isotropic".into(),
            kappa: 4.0,
            azimuth: 0.0,
            elevation: 0.0,
            resolution: hmimo_core::spectrum::DEFAULT_RESOLUTION,
            model: "plane-wave".into(),
            regimes: "iid-uniform,csir-uniform,stat-csit,perfect-csi,asymptotic".into(),
            geometry: "planar".into(),
            wavelength: 0.1,
            area: 1.0,
            length: 1.0,
            users: "1:1".into(),
            radius: 1.0,
            noise: 1.0,
            format: Format::Csv,
            out: None,
            threads: None,
            verbose: 0,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String, std::io::Error),
    Parse(String, String),
    Env(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(path, e) => write!(f, "cannot read config {path}: {e}"),
            ConfigError::Parse(path, e) => write!(f, "invalid config {path}: {e}"),
            ConfigError::Env(value) => write!(f, "{SEED_ENV}={value} is not an unsigned integer"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(name.clone(), e))?;
        Self::from_toml(&text).map_err(|e| ConfigError::Parse(name, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serialises")
    }

    /// Defaults, then `file`, then flags. The seed falls back to
    /// [`SEED_ENV`] when neither the flags nor the file set it.
    pub fn resolve(file: Option<RunConfig>, flags: &Overrides, env_seed: Option<&str>) -> Result<Self, ConfigError> {
        let mut cfg = file.unwrap_or_default();
        flags.apply(&mut cfg);
        if cfg.seed.is_none() {
            if let Some(raw) = env_seed {
                let seed = raw.trim().parse().map_err(|_| ConfigError::Env(raw.to_owned()))?;
                cfg.seed = Some(seed);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(hmimo_core::harness::DEFAULT_SEED)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn full_round_trip() {
        let cfg = RunConfig {
            spacing_sweep: Some("0.25:0.5:6".into()),
            seed: Some(7),
            out: Some("x.csv".into()),
            threads: Some(3),
            format: Format::Json,
            snr_db: -3.25,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sidee = 3.0").is_err());
        assert!(RunConfig::from_toml("side = \"ten\"").is_err());
        assert_eq!(RunConfig::from_toml("side = 4.0").unwrap().side, 4.0);
    }

    #[test]
    fn seed_precedence() {
        let none = Overrides::default();
        let file = RunConfig {
            seed: Some(5),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::resolve(None, &none, None).unwrap().seed(), 1);
        assert_eq!(RunConfig::resolve(None, &none, Some("9")).unwrap().seed(), 9);
        assert_eq!(RunConfig::resolve(Some(file.clone()), &none, Some("9")).unwrap().seed(), 5);
        let flag = Overrides {
            seed: Some(11),
            ..Overrides::default()
        };
        assert_eq!(RunConfig::resolve(Some(file), &flag, Some("9")).unwrap().seed(), 11);
        assert!(RunConfig::resolve(None, &none, Some("x")).is_err());
    }
}
