//! Party-mode crowd sizing from short-time energy.
//!
//! For each candidate crowd size the simulator produces many microphone
//! recordings; the pooled frame energies are smoothed with a kernel density
//! whose peak gives the level `mu_n`, and their standard deviation gives
//! `sigma_n`. A recording of `K` frames with mean energy `E` is then scored
//! against every size with the Gaussian likelihood `Normal(mu_n, sigma_n^2 / K)`
//! and the best-scoring size is reported.

mod kde;
mod sim;

pub use kde::{fit_kde, map_level, silverman_bandwidth, KdeCurve, GRID_POINTS, MIN_SAMPLES};
pub use sim::{CrowdModel, CrowdSimulator};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{ste_series, AudioClip, FrameSpec, SteSeries};
use crate::room::{NoiseSpec, RoomSpec};
use crate::{seed, Error, Result};

pub use kde::mean_and_std;

/// How a measurement is scored against each calibrated crowd size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringMode {
    /// Gaussian likelihood of the mean frame energy, variance `sigma_n^2 / K`.
    #[default]
    MeanSte,
    /// Sum of per-frame log densities under each size's kernel density.
    FrameKde,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::MeanSte => "mean-ste",
            ScoringMode::FrameKde => "frame-kde",
        })
    }
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-ste" => Ok(ScoringMode::MeanSte),
            "frame-kde" => Ok(ScoringMode::FrameKde),
            other => Err(Error::InvalidArgument(format!(
                "unknown scoring mode {other:?} (expected mean-ste or frame-kde)"
            ))),
        }
    }
}

/// Pool the frame energies of `trials` independent simulated recordings.
pub fn collect_ste_samples(
    sim: &CrowdSimulator<'_>,
    frame_spec: &FrameSpec,
    size: usize,
    trials: usize,
    duration: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let clip = sim.simulate(size, duration, seed::derive(seed, &format!("trial/{t}")))?;
            Ok(ste_series(&clip, frame_spec)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.concat())
}

/// Calibrated statistics of one crowd size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCalibration {
    pub kde: KdeCurve,
    /// Peak of the frame-energy density.
    pub map_level: f64,
    /// Standard deviation of frame energy.
    pub spread: f64,
    /// Mean frame energy (diagnostic).
    pub mean: f64,
    pub sample_count: usize,
}

pub const CALIBRATION_FORMAT: &str = "occupancy-ste-calibration";
pub const CALIBRATION_VERSION: u32 = 1;

/// Settings of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub duration_secs: f64,
    pub seed: u64,
}

/// Frame-energy statistics per crowd size for one room setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteCalibration {
    pub format: String,
    pub version: u32,
    pub room: RoomSpec,
    pub noise: NoiseSpec,
    pub model: CrowdModel,
    pub frame_spec: FrameSpec,
    pub sample_rate: u32,
    pub settings: CalibrationSettings,
    pub per_size: BTreeMap<usize, SizeCalibration>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SteCalibration {
    pub fn sizes(&self) -> Vec<usize> {
        self.per_size.keys().copied().collect()
    }

    /// Whether `mu_n` strictly increases with `n`.
    pub fn is_monotone(&self) -> bool {
        self.per_size
            .values()
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[0].map_level < w[1].map_level)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: SteCalibration = serde_json::from_str(text)?;
        if cal.format != CALIBRATION_FORMAT {
            return Err(Error::Document(format!(
                "expected format {CALIBRATION_FORMAT}, found {}",
                cal.format
            )));
        }
        if cal.version != CALIBRATION_VERSION {
            return Err(Error::Document(format!(
                "unsupported calibration version {}",
                cal.version
            )));
        }
        if cal.per_size.is_empty() {
            return Err(Error::Document("calibration has no crowd sizes".into()));
        }
        Ok(cal)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Calibrate frame-energy levels for each candidate size.
///
/// Size `n` draws its trials from `derive(seed, "size/<n>")`. A non-monotone
/// sequence of levels is reported as a warning, not an error.
pub fn calibrate(
    sim: &CrowdSimulator<'_>,
    frame_spec: &FrameSpec,
    sizes: &[usize],
    trials: usize,
    duration: f64,
    seed: u64,
) -> Result<SteCalibration> {
    frame_spec.validate()?;
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no crowd sizes to calibrate".into()));
    }
    let cap = sim.room.capacity();
    if let Some(&n) = sizes.iter().find(|&&n| n > cap) {
        return Err(Error::DensityViolation { requested: n, cap });
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut per_size = BTreeMap::new();
    for &n in &sorted {
        let samples =
            collect_ste_samples(sim, frame_spec, n, trials, duration, seed::derive(seed, &format!("size/{n}")))?;
        let kde = fit_kde(&samples, None)?;
        let (mean, spread) = mean_and_std(&samples);
        if !(spread > 0.0) {
            return Err(Error::ZeroSpread);
        }
        per_size.insert(
            n,
            SizeCalibration {
                map_level: map_level(&kde),
                kde,
                spread,
                mean,
                sample_count: samples.len(),
            },
        );
    }

    let mut cal = SteCalibration {
        format: CALIBRATION_FORMAT.into(),
        version: CALIBRATION_VERSION,
        room: sim.room,
        noise: sim.noise,
        model: sim.model,
        frame_spec: *frame_spec,
        sample_rate: sim.sample_rate(),
        settings: CalibrationSettings {
            sizes: sorted,
            trials,
            duration_secs: duration,
            seed,
        },
        per_size,
        warnings: Vec::new(),
    };
    if !cal.is_monotone() {
        let msg = "calibrated levels do not increase with crowd size; more trials are needed"
            .to_string();
        warn!("{msg}");
        cal.warnings.push(msg);
    }
    Ok(cal)
}

/// Result of classifying one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    pub predicted: usize,
    pub mode: ScoringMode,
    /// Log-likelihood of each candidate size.
    pub scores: BTreeMap<usize, f64>,
    pub duration: f64,
    pub frames_used: usize,
    pub mean_ste: f64,
}

pub fn estimate_occupancy(
    clip: &AudioClip,
    cal: &SteCalibration,
    mode: ScoringMode,
) -> Result<OccupancyEstimate> {
    if clip.sample_rate() != cal.sample_rate {
        return Err(Error::RateMismatch {
            expected: cal.sample_rate,
            found: clip.sample_rate(),
        });
    }
    let series = ste_series(clip, &cal.frame_spec)?;
    if series.is_empty() {
        let (frame, _) = cal.frame_spec.samples(clip.sample_rate())?;
        return Err(Error::ClipTooShort {
            samples: clip.len(),
            frame,
        });
    }
    estimate_from_series(&series, cal, mode)
}

/// Classify an already computed energy series.
pub fn estimate_from_series(
    series: &SteSeries,
    cal: &SteCalibration,
    mode: ScoringMode,
) -> Result<OccupancyEstimate> {
    if series.frame_spec != cal.frame_spec {
        return Err(Error::FrameSpecMismatch {
            calibration: cal.frame_spec.to_string(),
            measurement: series.frame_spec.to_string(),
        });
    }
    let k = series.len();
    let mean = series.mean().ok_or(Error::ClipTooShort {
        samples: 0,
        frame: 1,
    })?;
    let kf = k as f64;
    let scores: BTreeMap<usize, f64> = cal
        .per_size
        .iter()
        .map(|(&n, c)| {
            let score = match mode {
                ScoringMode::MeanSte => {
                    let var = c.spread * c.spread / kf;
                    -0.5 * (2.0 * PI * var).ln() - (mean - c.mean).powi(2) / (2.0 * var)
                }
                ScoringMode::FrameKde => series
                    .values
                    .iter()
                    .map(|&e| c.kde.density_at(e).max(f64::MIN_POSITIVE).ln())
                    .sum(),
            };
            (n, score)
        })
        .collect();
    let mut predicted = None;
    for (&n, &s) in &scores {
        match predicted {
            Some((_, best)) if s <= best => {}
            _ => predicted = Some((n, s)),
        }
    }
    let (predicted, _) = predicted.ok_or_else(|| Error::Document("empty calibration".into()))?;
    Ok(OccupancyEstimate {
        predicted,
        mode,
        scores,
        duration: series.source_duration,
        frames_used: k,
        mean_ste: mean,
    })
}

/// Fraction of correct predictions per (size, time) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub sizes: Vec<usize>,
    pub times: Vec<f64>,
    pub trials: usize,
    /// `accuracy[i][j]` for `sizes[i]` and `times[j]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn get(&self, size: usize, time: f64) -> Option<f64> {
        let i = self.sizes.iter().position(|&s| s == size)?;
        let j = self.times.iter().position(|&t| t == time)?;
        Some(self.accuracy[i][j])
    }

    /// Sizes down the rows, times across the columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("speakers");
        for t in &self.times {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
        for (n, row) in self.sizes.iter().zip(&self.accuracy) {
            out.push_str(&n.to_string());
            for a in row {
                out.push_str(&format!(",{a:.4}"));
            }
            out.push('\n');
        }
        out
    }

    /// One row per (time, size) cell, for plotting accuracy against time.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("time_s,speakers,accuracy\n");
        for (j, t) in self.times.iter().enumerate() {
            for (i, n) in self.sizes.iter().enumerate() {
                out.push_str(&format!("{t},{n},{:.4}\n", self.accuracy[i][j]));
            }
        }
        out
    }
}

/// Simulate fresh recordings for every (size, time) cell and score them.
///
/// Trial `k` of cell `(n, t)` uses `derive(seed, "size/<n>/time/<t>/trial/<k>")`.
pub fn evaluate_accuracy(
    sim: &CrowdSimulator<'_>,
    cal: &SteCalibration,
    sizes: &[usize],
    times: &[f64],
    trials: usize,
    seed: u64,
    mode: ScoringMode,
) -> Result<AccuracyMatrix> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let mut accuracy = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut row = Vec::with_capacity(times.len());
        for &t in times {
            let hits = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let s = seed::derive(seed, &format!("size/{n}/time/{t}/trial/{k}"));
                    let clip = sim.simulate(n, t, s)?;
                    Ok((estimate_occupancy(&clip, cal, mode)?.predicted == n) as usize)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum::<usize>();
            row.push(hits as f64 / trials as f64);
        }
        accuracy.push(row);
    }
    Ok(AccuracyMatrix {
        sizes: sizes.to_vec(),
        times: times.to_vec(),
        trials,
        accuracy,
    })
}

/// Mean frame energy of `trials` independent recordings of `size` talkers.
pub fn mean_ste_samples(
    sim: &CrowdSimulator<'_>,
    frame_spec: &FrameSpec,
    size: usize,
    duration: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let clip = sim.simulate(size, duration, seed::derive(seed, &format!("trial/{k}")))?;
            ste_series(&clip, frame_spec)?
                .mean()
                .ok_or(Error::ClipTooShort {
                    samples: clip.len(),
                    frame: 0,
                })
        })
        .collect()
}
