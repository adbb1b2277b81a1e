//! Wavenumber-domain channel statistics, spatial degrees of freedom and
//! capacity for holographic MIMO links.
//!
//! Every numerical routine is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix double precision, which is what the experiments
//! and the CLI use.

pub mod analysis;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod multiuser;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Aperture64 = geometry::Aperture<f64>;
pub type ModeSet64 = geometry::ModeSet<f64>;
pub type ModeVariances64 = spectrum::ModeVariances<f64>;
pub type ScatteringSpec64 = spectrum::ScatteringSpec<f64>;
pub type CorrelationModel64 = channel::CorrelationModel<f64>;
pub type AngularChannel64 = channel::AngularChannel<f64>;
pub type CapacityReport64 = capacity::CapacityReport<f64>;
pub type PowerAllocation64 = capacity::PowerAllocation<f64>;
pub type EigenReport64 = analysis::EigenReport<f64>;
pub type UserLink64 = multiuser::UserLink<f64>;
pub type LisConfig64 = multiuser::LisConfig<f64>;
