//! Signal types, framing, windowing, short-time energy and WAV I/O.

mod frame;
pub mod wav;

pub use frame::{
    frame_count, frame_signal, make_window, short_time_energy, ste_series, FrameSpec, SteSeries,
    Window,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default sample rate of every generated or processed signal.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono PCM signal with nominal amplitude range [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} is not finite"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiply every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }

    /// Root-mean-square amplitude, 0 for an empty clip.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Concatenate clips of one sample rate.
    pub fn concat(parts: &[AudioClip]) -> Result<Self> {
        let rate = parts
            .first()
            .map(|c| c.sample_rate)
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut samples = Vec::with_capacity(parts.iter().map(|c| c.len()).sum());
        for part in parts {
            if part.sample_rate != rate {
                return Err(Error::RateMismatch {
                    expected: rate,
                    found: part.sample_rate,
                });
            }
            samples.extend_from_slice(&part.samples);
        }
        Ok(Self {
            samples,
            sample_rate: rate,
        })
    }
}
