//! Portable random streams for synthetic data.
//!
//! ChaCha8 produces the same stream on every platform, and Gaussians come from
//! the basic Box–Muller transform written out here so that the mapping
//! from seed to data does not depend on a distribution crate's internals.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Standard normal sample. Samples are produced in pairs; the second
    /// member of each pair is returned by the next call.
    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Fair coin from the same stream.
    pub fn coin(&mut self) -> bool {
        self.rng.random_bool(0.5)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}
