use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::{frame_count, make_window, AudioClip, Window, DEFAULT_SAMPLE_RATE};
use crate::{Error, Result};

const PRE_EMPHASIS: f64 = 0.97;
const LOG_FLOOR: f64 = 1e-10;
/// Energy ratio of -80 dB.
const SILENCE_BELOW_PEAK: f64 = 1e-8;

/// Cepstral front end settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub step_ms: f64,
    pub mel_filters: usize,
    /// Coefficients kept per frame.
    pub cepstral_coeffs: usize,
    /// Each feature vector is a frame followed by `context_frames - 1` successors.
    pub context_frames: usize,
    pub sample_rate: u32,
    /// Keep `c0` (overall log level). When false the coefficients are
    /// `c1..=cepstral_coeffs`, which makes the features gain invariant.
    pub include_c0: bool,
    /// Frames with energy at or below this fraction of the clip's median
    /// frame energy are treated as silence by [`voiced_features`].
    pub vad_ratio: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_ms: 20.0,
            step_ms: 10.0,
            mel_filters: 24,
            cepstral_coeffs: 20,
            context_frames: 6,
            sample_rate: DEFAULT_SAMPLE_RATE,
            include_c0: false,
            vad_ratio: 0.01,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0)
            || !(self.step_ms.is_finite() && self.step_ms > 0.0)
        {
            return bad(format!(
                "frame {} ms and step {} ms must be positive",
                self.frame_ms, self.step_ms
            ));
        }
        let top = self.cepstral_coeffs + usize::from(!self.include_c0);
        if self.cepstral_coeffs == 0 || top > self.mel_filters {
            return bad(format!(
                "{} cepstral coefficients do not fit {} mel filters",
                self.cepstral_coeffs, self.mel_filters
            ));
        }
        if self.context_frames == 0 {
            return bad("context must span at least one frame".into());
        }
        if self.sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        if !(self.vad_ratio.is_finite() && self.vad_ratio >= 0.0) {
            return bad(format!("VAD ratio {} must be non-negative", self.vad_ratio));
        }
        let (frame, step) = self.frame_samples();
        if frame < 2 || step == 0 {
            return bad("frames are shorter than two samples".into());
        }
        Ok(())
    }

    /// Dimension of a stacked feature vector.
    pub fn dimension(&self) -> usize {
        self.cepstral_coeffs * self.context_frames
    }

    fn frame_samples(&self) -> (usize, usize) {
        let rate = self.sample_rate as f64;
        (
            (self.frame_ms * rate / 1000.0).round() as usize,
            (self.step_ms * rate / 1000.0).round() as usize,
        )
    }
}

/// Reusable analysis state for one configuration.
pub struct MfccExtractor {
    config: MfccConfig,
    frame: usize,
    step: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: &MfccConfig) -> Result<Self> {
        config.validate()?;
        let (frame, step) = config.frame_samples();
        let fft_len = frame.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let filters = mel_filterbank(config.mel_filters, fft_len, config.sample_rate);
        let first = usize::from(!config.include_c0);
        let m = config.mel_filters as f64;
        let dct = (first..first + config.cepstral_coeffs)
            .map(|k| {
                (0..config.mel_filters)
                    .map(|j| (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();
        Ok(Self {
            config: *config,
            frame,
            step,
            window: make_window(Window::Hamming, frame)?,
            fft,
            fft_len,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    /// Per-frame cepstra and raw frame energies.
    pub fn frames(&self, clip: &AudioClip) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if clip.sample_rate() != self.config.sample_rate {
            return Err(Error::RateMismatch {
                expected: self.config.sample_rate,
                found: clip.sample_rate(),
            });
        }
        let x = clip.samples();
        let n = frame_count(x.len(), self.frame, self.step);
        if n < self.config.context_frames {
            return Err(Error::ClipTooShort {
                samples: x.len(),
                frame: self.frame + (self.config.context_frames - 1) * self.step,
            });
        }
        let mut emphasized = Vec::with_capacity(x.len());
        emphasized.push(x.first().copied().unwrap_or(0.0));
        emphasized.extend(x.windows(2).map(|w| w[1] - PRE_EMPHASIS * w[0]));

        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut cepstra = Vec::with_capacity(n);
        let mut energies = Vec::with_capacity(n);
        for i in 0..n {
            let start = i * self.step;
            let raw = &x[start..start + self.frame];
            energies.push(
                raw.iter()
                    .zip(&self.window)
                    .map(|(s, w)| w * s * s)
                    .sum::<f64>()
                    / self.frame as f64,
            );
            for (b, (s, w)) in buf
                .iter_mut()
                .zip(emphasized[start..start + self.frame].iter().zip(&self.window))
            {
                *b = Complex::new(s * w, 0.0);
            }
            buf[self.frame..].fill(Complex::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let log_mel: Vec<f64> = self
                .filters
                .iter()
                .map(|(lo, weights)| {
                    let e: f64 = weights
                        .iter()
                        .zip(&buf[*lo..])
                        .map(|(w, c)| w * c.norm())
                        .sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            cepstra.push(
                self.dct
                    .iter()
                    .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
                    .collect(),
            );
        }
        Ok((cepstra, energies))
    }

    /// Every stacked feature vector of the clip.
    pub fn features(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let (cepstra, _) = self.frames(clip)?;
        Ok(self.stack(&cepstra, |_| true))
    }

    /// Stacked feature vectors whose frames all carry speech.
    ///
    /// A frame is silent when its energy is at or below `vad_ratio` times the
    /// clip's median frame energy, or more than 80 dB below the loudest frame
    /// (the median alone is useless once most of the clip is pause).
    pub fn voiced_features(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let (cepstra, energies) = self.frames(clip)?;
        let mut sorted = energies.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let peak = sorted[sorted.len() - 1];
        let threshold = (self.config.vad_ratio * median).max(SILENCE_BELOW_PEAK * peak);
        let voiced: Vec<bool> = energies.iter().map(|&e| e > threshold).collect();
        let c = self.config.context_frames;
        Ok(self.stack(&cepstra, |i| voiced[i..i + c].iter().all(|&v| v)))
    }

    fn stack(&self, cepstra: &[Vec<f64>], keep: impl Fn(usize) -> bool) -> Vec<Vec<f64>> {
        let c = self.config.context_frames;
        (0..=cepstra.len() - c)
            .filter(|&i| keep(i))
            .map(|i| cepstra[i..i + c].concat())
            .collect()
    }
}

/// Stacked MFCC vectors of a clip; see [`MfccExtractor::features`].
pub fn mfcc_features(clip: &AudioClip, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    MfccExtractor::new(config)?.features(clip)
}

/// Speech-only stacked MFCC vectors; see [`MfccExtractor::voiced_features`].
pub fn voiced_features(clip: &AudioClip, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    MfccExtractor::new(config)?.voiced_features(clip)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist,
/// each stored as (first bin, weights).
fn mel_filterbank(count: usize, fft_len: usize, rate: u32) -> Vec<(usize, Vec<f64>)> {
    let nyquist = rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..count + 2)
        .map(|i| mel_to_hz(top * i as f64 / (count + 1) as f64))
        .collect();
    let bin_hz = rate as f64 / fft_len as f64;
    let bins = fft_len / 2 + 1;
    (0..count)
        .map(|j| {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            let weights: Vec<f64> = (0..bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            (first, weights[first..=last.max(first)].to_vec())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_profile, synth_utterance};

    fn speech(secs: f64) -> AudioClip {
        let p = generate_profile("a", 3);
        synth_utterance(&p, secs, 1, 16_000).unwrap()
    }

    #[test]
    fn default_dimension_is_120() {
        let f = mfcc_features(&speech(5.0), &MfccConfig::default()).unwrap();
        assert_eq!(f.len(), 499 - 5);
        assert!(f.iter().all(|v| v.len() == 120));
        assert!(f.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn stacks_consecutive_frames() {
        let cfg = MfccConfig::default();
        let ex = MfccExtractor::new(&cfg).unwrap();
        let (cep, _) = ex.frames(&speech(1.0)).unwrap();
        let f = ex.features(&speech(1.0)).unwrap();
        assert_eq!(f[3], cep[3..9].concat());
    }

    #[test]
    fn zero_clip_gives_constant_vectors() {
        let clip = AudioClip::silence(16_000, 16_000).unwrap();
        let f = mfcc_features(&clip, &MfccConfig::default()).unwrap();
        assert_eq!(f.len(), 94);
        assert!(f.iter().flatten().all(|x| x.is_finite()));
        assert!(f.iter().all(|v| v == &f[0]));
        assert!(voiced_features(&clip, &MfccConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn mostly_silent_clip_keeps_only_speech() {
        let cfg = MfccConfig::default();
        let s = speech(1.0);
        let mut quiet = AudioClip::silence(48_000, 16_000).unwrap().into_samples();
        quiet.iter_mut().enumerate().for_each(|(i, x)| *x = 1e-30 * ((i % 7) as f64 - 3.0));
        let joined = AudioClip::concat(&[s.clone(), AudioClip::new(quiet, 16_000).unwrap()]).unwrap();
        let voiced = voiced_features(&joined, &cfg).unwrap();
        let alone = voiced_features(&s, &cfg).unwrap();
        assert!(voiced.len() <= alone.len() + 5);
        assert!(voiced.iter().all(|v| v[0] > -200.0));
    }

    #[test]
    fn gain_moves_only_c0() {
        let cfg = MfccConfig {
            include_c0: true,
            ..MfccConfig::default()
        };
        // Dither keeps every filter above the log floor.
        let mut rng = crate::seed::rng(5);
        let noisy: Vec<f64> = speech(2.0)
            .samples()
            .iter()
            .map(|s| s + 1e-3 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let clip = AudioClip::new(noisy, 16_000).unwrap();
        let a = mfcc_features(&clip, &cfg).unwrap();
        let b = mfcc_features(&clip.scaled(0.5).unwrap(), &cfg).unwrap();
        let shift = 24.0 * 0.5f64.ln();
        for (u, v) in a.iter().zip(&b) {
            for (i, (x, y)) in u.iter().zip(v).enumerate() {
                if i % 20 == 0 {
                    assert!((y - x - shift).abs() < 1e-8, "{x} {y} {shift}");
                } else {
                    assert!((y - x).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn without_c0_features_ignore_gain() {
        let cfg = MfccConfig::default();
        let clip = speech(2.0);
        let a = voiced_features(&clip, &cfg).unwrap();
        let b = voiced_features(&clip.scaled(3.0).unwrap(), &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a[0].len(), 120);
        for (u, v) in a.iter().zip(&b) {
            for (x, y) in u.iter().zip(v) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn vad_drops_silence() {
        let cfg = MfccConfig::default();
        let s = speech(2.0);
        let joined = AudioClip::concat(&[s.clone(), AudioClip::silence(16_000, 16_000).unwrap(), s])
            .unwrap();
        let all = mfcc_features(&joined, &cfg).unwrap();
        let voiced = voiced_features(&joined, &cfg).unwrap();
        assert!(voiced.len() + 95 <= all.len());
    }

    #[test]
    fn dct_matches_direct_sum() {
        let cfg = MfccConfig {
            context_frames: 1,
            include_c0: true,
            ..MfccConfig::default()
        };
        let ex = MfccExtractor::new(&cfg).unwrap();
        let clip = speech(0.1);
        let (cep, _) = ex.frames(&clip).unwrap();
        // Oracle: naive DFT magnitude, the same filters, a naive DCT.
        let x = clip.samples();
        let mut y = vec![x[0]];
        y.extend(x.windows(2).map(|w| w[1] - 0.97 * w[0]));
        let frame: Vec<f64> = y[..320]
            .iter()
            .enumerate()
            .map(|(n, v)| v * (0.54 - 0.46 * (2.0 * PI * n as f64 / 319.0).cos()))
            .collect();
        let mag: Vec<f64> = (0..257)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, v) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * n) as f64 / 512.0;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect();
        let fb = mel_filterbank(24, 512, 16_000);
        let logs: Vec<f64> = fb
            .iter()
            .map(|(lo, w)| w.iter().zip(&mag[*lo..]).map(|(a, b)| a * b).sum::<f64>().ln())
            .collect();
        for k in 0..20 {
            let c: f64 = (0..24)
                .map(|j| logs[j] * (PI * k as f64 * (j as f64 + 0.5) / 24.0).cos())
                .sum();
            assert!((c - cep[0][k]).abs() < 1e-8, "c{k}");
        }
    }

    #[test]
    fn filterbank_shape() {
        let fb = mel_filterbank(24, 512, 16_000);
        assert_eq!(fb.len(), 24);
        for (lo, w) in &fb {
            assert!(!w.is_empty());
            assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(lo + w.len() <= 257);
        }
        assert!(fb.windows(2).all(|p| p[0].0 <= p[1].0));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = MfccConfig::default();
        let short = AudioClip::new(vec![0.1; 1000], 16_000).unwrap();
        assert!(matches!(mfcc_features(&short, &cfg), Err(Error::ClipTooShort { .. })));
        let other = AudioClip::new(vec![0.1; 8000], 8000).unwrap();
        assert!(matches!(mfcc_features(&other, &cfg), Err(Error::RateMismatch { .. })));
        for bad in [
            MfccConfig { cepstral_coeffs: 25, ..cfg },
            MfccConfig { cepstral_coeffs: 24, include_c0: false, ..cfg },
            MfccConfig { context_frames: 0, ..cfg },
            MfccConfig { frame_ms: 0.0, ..cfg },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
