//! Synthetic traces from a seeded Ornstein–Uhlenbeck process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-reverting Gaussian process sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuSpec {
    pub mean: f64,
    /// Stationary standard deviation.
    pub stdev: f64,
    /// Correlation (mean-reversion) time (s).
    pub correlation_s: f64,
    pub seed: u64,
    /// Lower clamp applied to every sample, e.g. 0 for wind speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl OuSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.stdev >= 0.0) {
            return Err(Error::Config("OU stdev must be non-negative".into()));
        }
        if !(self.correlation_s > 0.0) {
            return Err(Error::Config("OU correlation time must be positive".into()));
        }
        Ok(())
    }

    /// `n` samples spaced `dt` apart, started from the stationary
    /// distribution. Uses the exact discretisation, so the statistics do
    /// not depend on `dt`.
    pub fn generate(&self, n: usize, dt: f64) -> Result<Vec<f64>> {
        self.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Config("sample spacing must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let decay = (-dt / self.correlation_s).exp();
        let diffusion = self.stdev * (1.0 - decay * decay).sqrt();
        let mut x = self.mean + self.stdev * draw(&mut rng);
        let floor = self.floor.unwrap_or(f64::NEG_INFINITY);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(x.max(floor));
            x = self.mean + (x - self.mean) * decay + diffusion * draw(&mut rng);
        }
        Ok(out)
    }
}

fn draw(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
