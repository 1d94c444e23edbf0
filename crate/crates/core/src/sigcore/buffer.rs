use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex baseband samples tagged with their sample rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexBuffer {
    pub samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of |x|², zero for an empty buffer.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Mean power over `range`, clamped to the buffer.
    pub fn power_in(&self, range: std::ops::Range<usize>) -> f64 {
        let end = range.end.min(self.samples.len());
        let start = range.start.min(end);
        mean_power(&self.samples[start..end])
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Copy of `self` with `samples` replaced, keeping the rate.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

pub fn power_to_db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// `10·log10(mean |x|²)`.
///
/// An all-zero buffer yields `f64::NEG_INFINITY`; callers test with
/// `is_finite()`.
pub fn measure_power_db(x: &ComplexBuffer) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidInput("cannot measure power of an empty buffer".into()));
    }
    Ok(power_to_db(x.power()))
}
