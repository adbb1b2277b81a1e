//! Reproducible complex Gaussian streams.
//!
//! Every `(seed, trial)` pair owns an independent ChaCha8 stream (the trial
//! index selects the stream id), and each complex draw consumes a fixed number
//! of words, so entry `k` of a trial is a pure function of `(seed, trial, k)`
//! no matter which thread evaluates it.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Circularly symmetric complex Gaussian source, unit variance per draw.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Self { rng }
    }

    /// Independent sub-stream for auxiliary draws of the same trial.
    pub fn derived(seed: u64, trial: u64, salt: u64) -> Self {
        Self::new(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15), trial)
    }

    /// Box–Muller draw; real and imaginary parts each have variance ½.
    pub fn next_complex(&mut self) -> Complex<f64> {
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex::new(r * theta.cos(), r * theta.sin())
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
