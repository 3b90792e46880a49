use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    Hamming,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Rectangular => f.write_str("rectangular"),
            Window::Hamming => f.write_str("hamming"),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hamming" => Ok(Window::Hamming),
            other => Err(Error::InvalidArgument(format!("unknown window {other:?}"))),
        }
    }
}

/// Frame and hop durations in milliseconds plus the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub frame_ms: f64,
    pub step_ms: f64,
    pub window: Window,
}

impl Default for FrameSpec {
    /// 50 ms Hamming frames every 25 ms.
    fn default() -> Self {
        Self {
            frame_ms: 50.0,
            step_ms: 25.0,
            window: Window::Hamming,
        }
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms/{}ms {}", self.frame_ms, self.step_ms, self.window)
    }
}

impl FrameSpec {
    pub fn new(frame_ms: f64, step_ms: f64, window: Window) -> Result<Self> {
        let spec = Self {
            frame_ms,
            step_ms,
            window,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "frame length {} ms must be positive",
                self.frame_ms
            )));
        }
        if !(self.step_ms.is_finite() && self.step_ms > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "step length {} ms must be positive",
                self.step_ms
            )));
        }
        if self.step_ms > self.frame_ms {
            return Err(Error::InvalidSpec(format!(
                "step {} ms exceeds frame {} ms",
                self.step_ms, self.frame_ms
            )));
        }
        Ok(())
    }

    /// Frame and step lengths in samples at `sample_rate`.
    pub fn samples(&self, sample_rate: u32) -> Result<(usize, usize)> {
        self.validate()?;
        let frame = (self.frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        let step = (self.step_ms * sample_rate as f64 / 1000.0).round() as usize;
        if frame == 0 || step == 0 {
            return Err(Error::InvalidSpec(format!(
                "{self} is shorter than one sample at {sample_rate} Hz"
            )));
        }
        Ok((frame, step.min(frame)))
    }
}

/// Number of full frames of `frame` samples at hop `step` in `total` samples.
pub fn frame_count(total: usize, frame: usize, step: usize) -> usize {
    if frame == 0 || step == 0 || total < frame {
        0
    } else {
        (total - frame) / step + 1
    }
}

/// Split a clip into overlapping full frames; a trailing partial frame is dropped.
pub fn frame_signal(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    let (frame, step) = spec.samples(clip.sample_rate())?;
    let n = frame_count(clip.len(), frame, step);
    let samples = clip.samples();
    Ok((0..n)
        .map(|i| samples[i * step..i * step + frame].to_vec())
        .collect())
}

pub fn make_window(kind: Window, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    Ok(match kind {
        Window::Rectangular => vec![1.0; n],
        Window::Hamming if n == 1 => vec![1.0],
        Window::Hamming => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / denom).cos())
                .collect()
        }
    })
}

/// `(1/N) * sum w(n) |x(n)|^2`: the window weights the squared signal.
pub fn short_time_energy(frame: &[f64], window: &[f64]) -> Result<f64> {
    if frame.len() != window.len() {
        return Err(Error::InvalidArgument(format!(
            "frame has {} samples but window has {}",
            frame.len(),
            window.len()
        )));
    }
    if frame.is_empty() {
        return Err(Error::InvalidArgument("empty frame".into()));
    }
    let sum: f64 = frame.iter().zip(window).map(|(x, w)| w * x * x).sum();
    Ok(sum / frame.len() as f64)
}

/// Frame-by-frame short-time energy of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteSeries {
    pub values: Vec<f64>,
    pub frame_spec: FrameSpec,
    /// Duration of the analysed clip in seconds.
    pub source_duration: f64,
}

impl SteSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }
}

pub fn ste_series(clip: &AudioClip, spec: &FrameSpec) -> Result<SteSeries> {
    let (frame, step) = spec.samples(clip.sample_rate())?;
    let window = make_window(spec.window, frame)?;
    let samples = clip.samples();
    let values = (0..frame_count(samples.len(), frame, step))
        .map(|i| short_time_energy(&samples[i * step..i * step + frame], &window))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteSeries {
        values,
        frame_spec: *spec,
        source_duration: clip.duration(),
    })
}
