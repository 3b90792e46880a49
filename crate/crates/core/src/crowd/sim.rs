use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::room::{mix_slices, place_speakers, NoiseSpec, RoomSpec};
use crate::synth::Corpus;
use crate::{seed, Error, Result};

/// How a simulated crowd behaves over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrowdModel {
    /// Time between re-arrangements of the talkers, in seconds.
    pub segment_secs: f64,
    /// Standard deviation in dB of a loudness gain shared by every talker
    /// (the crowd raising or lowering its voice together).
    pub effort_db: f64,
    /// Time between redraws of the shared gain, in seconds.
    pub effort_secs: f64,
}

impl Default for CrowdModel {
    fn default() -> Self {
        Self {
            segment_secs: 0.25,
            effort_db: 0.9,
            effort_secs: 2.5,
        }
    }
}

impl CrowdModel {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.segment_secs) || !positive(self.effort_secs) {
            return Err(Error::InvalidArgument(format!(
                "segment ({} s) and effort ({} s) intervals must be positive",
                self.segment_secs, self.effort_secs
            )));
        }
        if !(self.effort_db.is_finite() && self.effort_db >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "effort deviation {} dB must be non-negative",
                self.effort_db
            )));
        }
        Ok(())
    }
}

/// Simulates the microphone signal of a talking crowd.
///
/// A clip is built from consecutive segments of `model.segment_secs`. Each
/// segment has its own random placement, its own utterance excerpts drawn
/// from the corpus (uniform utterance, uniform circular offset) and its own
/// noise stream. On top of that the speech is scaled by a shared lognormal
/// gain that changes every `model.effort_secs`. Everything is derived from
/// the clip seed.
#[derive(Debug, Clone)]
pub struct CrowdSimulator<'a> {
    pub room: RoomSpec,
    pub noise: NoiseSpec,
    pub model: CrowdModel,
    corpus: &'a Corpus,
    sources: Vec<&'a [f64]>,
}

impl<'a> CrowdSimulator<'a> {
    pub fn new(
        corpus: &'a Corpus,
        room: RoomSpec,
        noise: NoiseSpec,
        model: CrowdModel,
    ) -> Result<Self> {
        room.validate()?;
        noise.validate()?;
        model.validate()?;
        let sources: Vec<&[f64]> = corpus
            .utterances()
            .map(|(_, c)| c.samples())
            .filter(|s| !s.is_empty())
            .collect();
        if sources.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            room,
            noise,
            model,
            corpus,
            sources,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.corpus.sample_rate()
    }

    /// A `duration`-second microphone recording of `size` talkers.
    pub fn simulate(&self, size: usize, duration: f64, clip_seed: u64) -> Result<AudioClip> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "duration {duration} s must be positive"
            )));
        }
        let cap = self.room.capacity();
        if size > cap {
            return Err(Error::DensityViolation {
                requested: size,
                cap,
            });
        }
        let rate = self.sample_rate();
        let total = (duration * rate as f64).round() as usize;
        let seg_len = samples_of(self.model.segment_secs, rate);
        let effort = self.effort(clip_seed, total, rate);
        let mut out = Vec::with_capacity(total);
        let mut window = vec![vec![0.0; seg_len]; size];
        let mut j = 0;
        while out.len() < total {
            let len = seg_len.min(total - out.len());
            let noise = self
                .noise
                .with_seed(seed::derive(clip_seed, &format!("segment/{j}/noise")));
            let bg = background(len, &noise)?;
            if size == 0 {
                out.extend(bg);
            } else {
                let placement = place_speakers(
                    &self.room,
                    size,
                    seed::derive(clip_seed, &format!("segment/{j}/placement")),
                )?;
                let mut rng =
                    seed::rng(seed::derive(clip_seed, &format!("segment/{j}/utterances")));
                for buf in window.iter_mut() {
                    let src = self.sources[rng.random_range(0..self.sources.len())];
                    let offset = rng.random_range(0..src.len());
                    circular_copy(src, offset, &mut buf[..len]);
                }
                let refs: Vec<&[f64]> = window.iter().map(|w| &w[..len]).collect();
                let speech = mix_slices(&refs, rate, &placement, &self.room, &NoiseSpec::silent())?;
                let start = out.len();
                out.extend(
                    speech
                        .samples()
                        .iter()
                        .zip(bg)
                        .enumerate()
                        .map(|(i, (s, g))| s * effort.gain(start + i) + g),
                );
            }
            j += 1;
        }
        AudioClip::new(out, rate)
    }

    fn effort(&self, clip_seed: u64, total: usize, rate: u32) -> Effort {
        let block = samples_of(self.model.effort_secs, rate);
        let gains = if self.model.effort_db == 0.0 {
            Vec::new()
        } else {
            (0..total.div_ceil(block))
                .map(|k| {
                    let mut rng = seed::rng(seed::derive(clip_seed, &format!("effort/{k}")));
                    let z: f64 = StandardNormal.sample(&mut rng);
                    10f64.powf(self.model.effort_db * z / 20.0)
                })
                .collect()
        };
        Effort { block, gains }
    }
}

struct Effort {
    block: usize,
    gains: Vec<f64>,
}

impl Effort {
    fn gain(&self, sample: usize) -> f64 {
        self.gains.get(sample / self.block).copied().unwrap_or(1.0)
    }
}

fn samples_of(secs: f64, rate: u32) -> usize {
    ((secs * rate as f64).round() as usize).max(1)
}

fn circular_copy(src: &[f64], offset: usize, dst: &mut [f64]) {
    let mut pos = offset;
    let mut filled = 0;
    while filled < dst.len() {
        let take = (src.len() - pos).min(dst.len() - filled);
        dst[filled..filled + take].copy_from_slice(&src[pos..pos + take]);
        filled += take;
        pos = 0;
    }
}

fn background(len: usize, noise: &NoiseSpec) -> Result<Vec<f64>> {
    if noise.std_dev == 0.0 {
        return Ok(vec![noise.mean; len]);
    }
    let normal = Normal::new(noise.mean, noise.std_dev)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = seed::rng(noise.seed);
    Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
}
