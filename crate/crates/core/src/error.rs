use thiserror::Error;

/// Errors raised by the channel, analysis and capacity routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid aperture: {0}")]
    InvalidAperture(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("mode set was enumerated for a different aperture")]
    ApertureMismatch,

    #[error("rank-zero channel")]
    RankZero,

    #[error("quadrature produced a non-finite value for mode cell ({l}, {m})")]
    Quadrature { l: i64, m: i64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("at sweep point spacing={spacing}: {source}")]
    AtSweepPoint {
        spacing: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankZero | Error::Quadrature { .. } | Error::NonConvergence { .. } => true,
            Error::AtSweepPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
