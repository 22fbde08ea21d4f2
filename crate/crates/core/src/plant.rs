//! Scalar linear plant `x' = a·x + b·u + d` and the seeded random streams
//! that drive it.
//!
//! Every trajectory owns its own [`RandomStream`]s. A stream is a ChaCha8
//! generator keyed by `(seed, lane)` and positioned on the 64-bit ChaCha
//! stream `stream_id`, so the same pair always yields the same sequence and
//! distinct ids never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub a: f64,
    pub b: f64,
    pub noise_std: f64,
    pub x0: f64,
}

impl PlantParams {
    pub fn new(a: f64, b: f64, noise_std: f64, x0: f64) -> Result<Self> {
        let params = Self {
            a,
            b,
            noise_std,
            x0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || self.a.abs() < 1.0 {
            return Err(Error::config("plant.a", format!("|a| must be >= 1, got {}", self.a)));
        }
        if !self.b.is_finite() || self.b == 0.0 {
            return Err(Error::config("plant.b", "b must be finite and nonzero"));
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(Error::config(
                "plant.noise_std",
                format!("noise_std must be > 0, got {}", self.noise_std),
            ));
        }
        if !self.x0.is_finite() {
            return Err(Error::config("plant.x0", "x0 must be finite"));
        }
        Ok(())
    }
}

/// One plant update. Evaluated left to right as written.
#[inline]
pub fn step_plant(params: &PlantParams, x: f64, u: f64, d: f64) -> f64 {
    params.a * x + params.b * u + d
}

/// Which consumer a substream feeds. Lanes of the same `(seed, stream_id)`
/// are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Lane {
    Noise = 0,
    Channel = 1,
    /// Initial-condition draws for Monte-Carlo estimators.
    Init = 2,
    /// Free-standing draws (finite chain simulation, tests).
    Aux = 3,
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::with_lane(seed, stream_id, Lane::Aux)
    }

    pub fn with_lane(seed: u64, stream_id: u64, lane: Lane) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8] = lane as u8;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Standard normal draw (ziggurat).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// One draw of `d_t ~ N(0, noise_std²)`.
#[inline]
pub fn sample_noise(params: &PlantParams, stream: &mut RandomStream) -> f64 {
    params.noise_std * stream.standard_normal()
}
