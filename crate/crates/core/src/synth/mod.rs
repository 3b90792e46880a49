//! Deterministic source-filter speech synthesis.
//!
//! Utterances alternate voiced, unvoiced and silent segments drawn from a
//! seeded chain. Voiced segments excite three cascaded formant resonators
//! with a glottal pulse train; the formant targets move between a small
//! vowel inventory scaled to the speaker's neutral formants. Unvoiced
//! segments are resonator-filtered noise.

mod corpus;

pub use corpus::{build_corpus, ingest_directory, Corpus, CorpusManifest, CorpusParams, CorpusSpeaker, SpeakerSource};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::{seed, Error, Result};

/// Pitch range of generated speakers in Hz.
pub const PITCH_RANGE: (f64, f64) = (85.0, 255.0);
/// Vocal-tract scale applied to the neutral formants (500, 1500, 2500 Hz).
pub const TRACT_SCALE_RANGE: (f64, f64) = (0.82, 1.22);
pub const RMS_RANGE: (f64, f64) = (0.08, 0.12);
pub const VOICING_RANGE: (f64, f64) = (0.45, 0.6);
/// Glottal low-pass corner as a multiple of the pitch.
pub const TILT_RANGE: (f64, f64) = (0.6, 1.8);
pub const BREATHINESS_RANGE: (f64, f64) = (0.0, 0.3);
/// Fourth formant, fixed per speaker regardless of the vowel.
pub const F4_RANGE: (f64, f64) = (3300.0, 4300.0);
/// Per-speaker deviation of each vowel's formant ratios.
pub const VOWEL_SPREAD: f64 = 0.12;

/// Mean segment lengths in seconds: voiced, unvoiced, pause.
pub const MEAN_SEGMENT_SECS: [f64; 3] = [0.200, 0.100, 0.150];
const MIN_SEGMENT_SECS: f64 = 0.030;
const RAMP_SECS: f64 = 0.015;
/// Fraction of the non-voiced time spent in unvoiced (fricative) segments.
const UNVOICED_SHARE: f64 = 0.6;
/// Level of unvoiced segments relative to voiced ones.
const UNVOICED_LEVEL: f64 = 0.3;
const DC_CORNER_HZ: f64 = 25.0;
const NEUTRAL_FORMANTS: [f64; 3] = [500.0, 1500.0, 2500.0];

/// Formant frequency ratios of each vowel relative to the neutral vowel.
const VOWELS: [[f64; 3]; 6] = [
    [1.00, 1.00, 1.00],
    [0.54, 1.53, 1.20],
    [1.46, 0.73, 0.98],
    [0.60, 0.58, 0.90],
    [1.06, 1.23, 0.99],
    [1.14, 0.56, 0.96],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub freq_hz: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub id: String,
    pub pitch_hz: f64,
    /// Neutral-vowel formants, strictly increasing in frequency.
    pub formants: [Formant; 3],
    /// Vowel-independent fourth formant, above the third.
    pub f4: Formant,
    /// Glottal low-pass corner relative to the pitch; lower is darker.
    pub tilt: f64,
    /// Aspiration noise mixed into voiced speech, relative to the first harmonic.
    pub breathiness: f64,
    /// Formant ratios of each of the speaker's vowels relative to `formants`.
    pub vowels: Vec<[f64; 3]>,
    /// Long-run fraction of time spent in voiced segments.
    pub voicing_rate: f64,
    pub rms_target: f64,
    pub seed: u64,
}

impl SpeakerProfile {
    pub fn validate(&self) -> Result<()> {
        if !(60.0..=400.0).contains(&self.pitch_hz) {
            return Err(Error::InvalidArgument(format!(
                "pitch {} Hz outside [60, 400]",
                self.pitch_hz
            )));
        }
        if !self.formants.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz)
            || !(self.f4.freq_hz > self.formants[2].freq_hz)
        {
            return Err(Error::InvalidArgument("formants must be increasing".into()));
        }
        if !(self.tilt > 0.0 && self.tilt <= 10.0) || !(0.0..=1.0).contains(&self.breathiness) {
            return Err(Error::InvalidArgument(format!(
                "tilt {} or breathiness {} out of range",
                self.tilt, self.breathiness
            )));
        }
        if self.vowels.is_empty() || !self.vowels.iter().flatten().all(|&r| r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument("vowel ratios must be positive".into()));
        }
        if !(self.rms_target > 0.0 && self.rms_target <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rms target {} outside (0, 1]",
                self.rms_target
            )));
        }
        if !(0.0..=1.0).contains(&self.voicing_rate) {
            return Err(Error::InvalidArgument(format!(
                "voicing rate {} outside [0, 1]",
                self.voicing_rate
            )));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn generate_profile(id: &str, seed: u64) -> SpeakerProfile {
    let mut rng = seed::rng(seed::derive(seed, &format!("profile/{id}")));
    let pitch_hz = uniform(&mut rng, PITCH_RANGE);
    let scale = uniform(&mut rng, TRACT_SCALE_RANGE);
    let bandwidths = [(60.0, 100.0), (80.0, 130.0), (100.0, 180.0)];
    let mut formants = [Formant {
        freq_hz: 0.0,
        bandwidth_hz: 0.0,
    }; 3];
    for (j, f) in formants.iter_mut().enumerate() {
        let jitter = uniform(&mut rng, (0.9, 1.1));
        f.freq_hz = NEUTRAL_FORMANTS[j] * scale * jitter;
        f.bandwidth_hz = uniform(&mut rng, bandwidths[j]);
    }
    let voicing_rate = uniform(&mut rng, VOICING_RANGE);
    let rms_target = uniform(&mut rng, RMS_RANGE);
    let f4 = Formant {
        freq_hz: uniform(&mut rng, F4_RANGE).max(formants[2].freq_hz * 1.15),
        bandwidth_hz: uniform(&mut rng, (150.0, 300.0)),
    };
    let tilt = uniform(&mut rng, TILT_RANGE);
    let breathiness = uniform(&mut rng, BREATHINESS_RANGE);
    let spread = (1.0 - VOWEL_SPREAD, 1.0 + VOWEL_SPREAD);
    let vowels = VOWELS
        .iter()
        .map(|v| v.map(|r| r * uniform(&mut rng, spread)))
        .collect();
    SpeakerProfile {
        id: id.to_string(),
        pitch_hz,
        formants,
        f4,
        tilt,
        breathiness,
        vowels,
        voicing_rate,
        rms_target,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentKind {
    Voiced,
    Unvoiced,
    Pause,
}

struct Segment {
    kind: SegmentKind,
    start: usize,
    len: usize,
    gain: f64,
    /// Formant targets for voiced segments, fricative centre for unvoiced.
    formants: [f64; 3],
    pitch: f64,
}

/// Two-pole resonator with unity gain at DC.
#[derive(Default, Clone, Copy)]
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bandwidth: f64, rate: f64) {
        let t = 1.0 / rate;
        self.c = -(-2.0 * PI * bandwidth * t).exp();
        self.b = 2.0 * (-PI * bandwidth * t).exp() * (2.0 * PI * freq * t).cos();
        self.a = 1.0 - self.b - self.c;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn plan_segments(
    profile: &SpeakerProfile,
    total: usize,
    rate: f64,
    rng: &mut impl Rng,
) -> Vec<Segment> {
    let voiced = profile.voicing_rate;
    // Draw kinds with probability proportional to time share / mean length,
    // so the long-run time share of voiced segments equals `voicing_rate`.
    let weights = [
        voiced / MEAN_SEGMENT_SECS[0],
        (1.0 - voiced) * UNVOICED_SHARE / MEAN_SEGMENT_SECS[1],
        (1.0 - voiced) * (1.0 - UNVOICED_SHARE) / MEAN_SEGMENT_SECS[2],
    ];
    let weight_sum: f64 = weights.iter().sum();
    let scale = profile.formants[2].freq_hz / NEUTRAL_FORMANTS[2];
    let nyquist_guard = 0.45 * rate;

    let mut segments = Vec::new();
    let mut start = 0;
    while start < total {
        let u = rng.random::<f64>() * weight_sum;
        let (kind, idx) = if u < weights[0] {
            (SegmentKind::Voiced, 0)
        } else if u < weights[0] + weights[1] {
            (SegmentKind::Unvoiced, 1)
        } else {
            (SegmentKind::Pause, 2)
        };
        let e: f64 = Exp1.sample(rng);
        let secs = (MEAN_SEGMENT_SECS[idx] * e).max(MIN_SEGMENT_SECS);
        let len = ((secs * rate).round() as usize).min(total - start).max(1);
        let loudness: f64 = StandardNormal.sample(rng);
        let mut seg = Segment {
            kind,
            start,
            len,
            gain: (0.25 * loudness).exp(),
            formants: [0.0; 3],
            pitch: 0.0,
        };
        match kind {
            SegmentKind::Voiced => {
                let vowel = profile.vowels[rng.random_range(0..profile.vowels.len())];
                for j in 0..3 {
                    seg.formants[j] = (profile.formants[j].freq_hz * vowel[j]).min(nyquist_guard);
                }
                let jitter: f64 = StandardNormal.sample(rng);
                seg.pitch = profile.pitch_hz * (0.04 * jitter).exp();
            }
            SegmentKind::Unvoiced => {
                seg.formants[0] = (uniform(rng, (3000.0, 5500.0)) * scale).min(nyquist_guard);
            }
            SegmentKind::Pause => seg.gain = 0.0,
        }
        segments.push(seg);
        start += len;
    }
    segments
}

fn ramp(i: usize, len: usize, ramp_len: usize) -> f64 {
    let r = ramp_len.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= r {
        1.0
    } else {
        0.5 - 0.5 * (PI * (edge as f64 + 0.5) / r as f64).cos()
    }
}

/// Synthesize `duration` seconds of speech-like audio for `profile`.
///
/// The result has exactly `round(duration * sample_rate)` samples and is
/// scaled to the profile's RMS target.
pub fn synth_utterance(
    profile: &SpeakerProfile,
    duration: f64,
    utterance_seed: u64,
    sample_rate: u32,
) -> Result<AudioClip> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "utterance duration {duration} s must be positive"
        )));
    }
    profile.validate()?;
    let rate = sample_rate as f64;
    let total = (duration * rate).round() as usize;
    let mut rng = seed::rng(seed::derive(
        utterance_seed,
        &format!("utterance/{}/{}", profile.id, profile.seed),
    ));
    let segments = plan_segments(profile, total, rate, &mut rng);
    let ramp_len = (RAMP_SECS * rate).round() as usize;

    let mut voiced_out = vec![0.0; total];
    let mut noise_out = vec![0.0; total];
    let mut formant_chain = [Resonator::default(); 4];
    let mut fricative = Resonator::default();
    // Glottal low-pass state (two one-pole stages).
    let mut glottal = [0.0f64; 2];
    let mut phase = 0.0f64;
    let mut last_noise = 0.0f64;
    let (mut voiced_len, mut unvoiced_len) = (0usize, 0usize);

    for seg in &segments {
        let pitch = seg.pitch.max(1.0);
        let period = rate / pitch;
        let pole = (-2.0 * PI * pitch * profile.tilt / rate).exp();
        formant_chain[3].tune(profile.f4.freq_hz.min(0.45 * rate), profile.f4.bandwidth_hz, rate);
        for (j, r) in formant_chain.iter_mut().take(3).enumerate() {
            let f = if seg.kind == SegmentKind::Voiced {
                seg.formants[j]
            } else {
                profile.formants[j].freq_hz
            };
            r.tune(f, profile.formants[j].bandwidth_hz, rate);
        }
        match seg.kind {
            SegmentKind::Voiced => voiced_len += seg.len,
            SegmentKind::Unvoiced => {
                unvoiced_len += seg.len;
                fricative.tune(seg.formants[0], 1500.0, rate);
            }
            SegmentKind::Pause => {}
        }
        for i in 0..seg.len {
            let env = seg.gain * ramp(i, seg.len, ramp_len);
            let mut voiced_src = 0.0;
            let mut noise_src = 0.0;
            match seg.kind {
                SegmentKind::Voiced => {
                    phase += pitch / rate;
                    let pulse = if phase >= 1.0 {
                        phase -= 1.0;
                        1.0
                    } else {
                        0.0
                    };
                    glottal[0] = (1.0 - pole) * pulse + pole * glottal[0];
                    glottal[1] = (1.0 - pole) * glottal[0] + pole * glottal[1];
                    // Strong first harmonic on top of the pulse train.
                    let h1 = 6.0 / period * (2.0 * PI * phase).sin();
                    let n: f64 = StandardNormal.sample(&mut rng);
                    let breath = profile.breathiness * 6.0 / period * n;
                    voiced_src = env * (8.0 * glottal[1] + h1 + breath);
                }
                SegmentKind::Unvoiced => {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    // First difference tilts the noise towards high frequencies.
                    noise_src = env * (n - last_noise);
                    last_noise = n;
                }
                SegmentKind::Pause => {
                    glottal[0] *= pole;
                    glottal[1] *= pole;
                }
            }
            let mut v = voiced_src;
            for r in formant_chain.iter_mut() {
                v = r.step(v);
            }
            voiced_out[seg.start + i] = v;
            noise_out[seg.start + i] = fricative.step(noise_src);
        }
    }

    let active_rms = |buf: &[f64], len: usize| {
        if len == 0 {
            0.0
        } else {
            (buf.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt()
        }
    };
    let voiced_rms = active_rms(&voiced_out, voiced_len);
    let noise_rms = active_rms(&noise_out, unvoiced_len);
    let voiced_gain = if voiced_rms > 0.0 { 1.0 / voiced_rms } else { 0.0 };
    let noise_gain = if noise_rms > 0.0 {
        UNVOICED_LEVEL / noise_rms
    } else {
        0.0
    };
    // One-pole DC blocker (corner near 25 Hz at 16 kHz): the pulse train has
    // a positive mean that would otherwise add coherently across talkers.
    let pole = (-2.0 * PI * DC_CORNER_HZ / rate).exp();
    let (mut x1, mut y1) = (0.0, 0.0);
    let out = voiced_out
        .iter()
        .zip(&noise_out)
        .map(|(v, u)| {
            let x = v * voiced_gain + u * noise_gain;
            let y = x - x1 + pole * y1;
            x1 = x;
            y1 = y;
            y
        })
        .collect();

    let clip = AudioClip::new(out, sample_rate)?;
    let rms = clip.rms();
    if rms > 0.0 {
        clip.scaled(profile.rms_target / rms)
    } else {
        Ok(clip)
    }
}
