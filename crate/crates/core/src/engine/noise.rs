//! Band-limited white measurement noise: Gaussian samples held over a fixed
//! interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// How the configured power maps to the sample variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    /// `σ² = power / sample_time`.
    #[default]
    PowerPerSample,
    /// `σ² = power`.
    Variance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub power: f64,
    pub sample_time: f64,
    pub seed: u64,
    pub convention: NoiseConvention,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            power: 0.0,
            sample_time: 1e-3,
            seed: 0,
            convention: NoiseConvention::PowerPerSample,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(Error::config("noise power must be non-negative"));
        }
        if !(self.sample_time >= dt * (1.0 - 1e-9)) {
            return Err(Error::config(format!(
                "noise sample time {} is shorter than the step {dt}",
                self.sample_time
            )));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        match self.convention {
            NoiseConvention::PowerPerSample => self.power / self.sample_time,
            NoiseConvention::Variance => self.power,
        }
    }
}

/// Deterministic held-Gaussian sequence; query times must be non-decreasing.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    slot: Option<i64>,
    value: f64,
}

impl NoiseSource {
    pub fn new(spec: NoiseSpec) -> Result<Self> {
        let normal = Normal::new(0.0, spec.variance().sqrt())
            .map_err(|e| Error::config(format!("noise: {e}")))?;
        Ok(NoiseSource {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            normal,
            slot: None,
            value: 0.0,
        })
    }

    pub fn sample(&mut self, t: f64) -> f64 {
        if self.spec.power == 0.0 {
            return 0.0;
        }
        let slot = (t / self.spec.sample_time + 1e-9).floor() as i64;
        while self.slot.is_none_or(|s| s < slot) {
            self.value = self.normal.sample(&mut self.rng);
            self.slot = Some(self.slot.map_or(slot, |s| s + 1));
        }
        self.value
    }
}
