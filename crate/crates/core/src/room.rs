//! Free-field room model: speaker placement, inverse-distance decay and
//! microphone mixing with additive white Gaussian background noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::{seed, Error, Result};

/// Maximum crowd density in speakers per square metre.
pub const MAX_DENSITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RoomShape {
    Rectangular { length_m: f64, width_m: f64 },
    Circular { radius_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MicPosition {
    Center,
    Corner,
}

/// Room geometry, microphone placement and the decay anchor (`r0`, `a0`).
///
/// Rectangular rooms span `[0, length] x [0, width]`; circular rooms are
/// centred on the origin. A corner microphone sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomSpec {
    pub shape: RoomShape,
    pub mic: MicPosition,
    /// Minimum speaker distance from the microphone (m). The default suits
    /// a ceiling microphone about a metre above standing talkers.
    pub r0: f64,
    /// Amplitude recorded at distance `r0`.
    pub a0: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            shape: RoomShape::Rectangular {
                length_m: 10.0,
                width_m: 8.0,
            },
            mic: MicPosition::Center,
            r0: 1.0,
            a0: 1.0,
        }
    }
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.shape {
            RoomShape::Rectangular { length_m, width_m } => {
                if !(positive(length_m) && positive(width_m)) {
                    return Err(Error::InvalidRoom("room dimensions must be positive".into()));
                }
            }
            RoomShape::Circular { radius_m } => {
                if !positive(radius_m) {
                    return Err(Error::InvalidRoom("room radius must be positive".into()));
                }
                if self.mic == MicPosition::Corner {
                    return Err(Error::InvalidRoom(
                        "a corner microphone needs a rectangular room".into(),
                    ));
                }
            }
        }
        if !positive(self.r0) {
            return Err(Error::InvalidRoom("r0 must be positive".into()));
        }
        if !positive(self.a0) {
            return Err(Error::InvalidRoom("a0 must be positive".into()));
        }
        Ok(())
    }

    pub fn mic_coords(&self) -> [f64; 2] {
        match (self.shape, self.mic) {
            (RoomShape::Rectangular { length_m, width_m }, MicPosition::Center) => {
                [length_m / 2.0, width_m / 2.0]
            }
            (RoomShape::Rectangular { .. }, MicPosition::Corner) => [0.0, 0.0],
            (RoomShape::Circular { .. }, _) => [0.0, 0.0],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self.shape {
            RoomShape::Rectangular { length_m, width_m } => {
                (0.0..=length_m).contains(&p[0]) && (0.0..=width_m).contains(&p[1])
            }
            RoomShape::Circular { radius_m } => p[0].hypot(p[1]) <= radius_m,
        }
    }

    /// Largest crowd the density cap allows.
    pub fn capacity(&self) -> usize {
        (room_area(self) * MAX_DENSITY + 1e-9).floor() as usize
    }

    /// Amplitude gain of a speaker at distance `r`.
    pub fn gain(&self, r: f64) -> Result<f64> {
        if !(r > self.r0) {
            return Err(Error::TooClose {
                distance: r,
                r0: self.r0,
            });
        }
        Ok(self.r0 / r * self.a0)
    }
}

pub fn room_area(room: &RoomSpec) -> f64 {
    match room.shape {
        RoomShape::Rectangular { length_m, width_m } => length_m * width_m,
        RoomShape::Circular { radius_m } => PI * radius_m * radius_m,
    }
}

/// Speaker positions and their distances to the microphone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub mic: [f64; 2],
    pub positions: Vec<[f64; 2]>,
    pub distances: Vec<f64>,
}

impl Placement {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Placement at explicit positions.
    pub fn at(room: &RoomSpec, positions: Vec<[f64; 2]>) -> Result<Self> {
        room.validate()?;
        let mic = room.mic_coords();
        let mut distances = Vec::with_capacity(positions.len());
        for p in &positions {
            if !room.contains(*p) {
                return Err(Error::InvalidArgument(format!(
                    "position ({}, {}) lies outside the room",
                    p[0], p[1]
                )));
            }
            let d = (p[0] - mic[0]).hypot(p[1] - mic[1]);
            if !(d > room.r0) {
                return Err(Error::TooClose {
                    distance: d,
                    r0: room.r0,
                });
            }
            distances.push(d);
        }
        Ok(Self {
            mic,
            positions,
            distances,
        })
    }
}

/// Place `n` speakers uniformly over the room minus the `r0` disk around the
/// microphone, by rejection sampling from the bounding box.
pub fn place_speakers(room: &RoomSpec, n: usize, seed: u64) -> Result<Placement> {
    room.validate()?;
    let cap = room.capacity();
    if n > cap {
        return Err(Error::DensityViolation { requested: n, cap });
    }
    let (lo, hi) = match room.shape {
        RoomShape::Rectangular { length_m, width_m } => ([0.0, 0.0], [length_m, width_m]),
        RoomShape::Circular { radius_m } => ([-radius_m, -radius_m], [radius_m, radius_m]),
    };
    let mic = room.mic_coords();
    let mut rng = seed::rng(seed);
    let mut positions = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    while positions.len() < n {
        let p = [
            lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
            lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
        ];
        let d = (p[0] - mic[0]).hypot(p[1] - mic[1]);
        if room.contains(p) && d > room.r0 {
            positions.push(p);
            distances.push(d);
        }
    }
    Ok(Placement {
        mic,
        positions,
        distances,
    })
}

/// Scale a clip by the decay gain `(r0 / r) * a0`.
pub fn attenuate(clip: &AudioClip, r: f64, room: &RoomSpec) -> Result<AudioClip> {
    clip.scaled(room.gain(r)?)
}

/// Additive white Gaussian background noise at the microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub mean: f64,
    pub std_dev: f64,
    pub seed: u64,
}

/// Nominal RMS of one synthetic talker, used to size the default noise.
pub const REFERENCE_SPEECH_RMS: f64 = 0.1;

impl Default for NoiseSpec {
    /// Zero mean; noise energy 1% of a nominal talker's energy at `r0`.
    fn default() -> Self {
        Self {
            mean: 0.0,
            std_dev: REFERENCE_SPEECH_RMS / 10.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self {
            mean: 0.0,
            std_dev: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std_dev.is_finite() && self.std_dev >= 0.0 && self.mean.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise mean {} / std dev {} invalid",
                self.mean, self.std_dev
            )));
        }
        Ok(())
    }
}

/// Microphone signal `a0 * r0 * sum_i x_i(t) / r_i + g(t)`.
///
/// Clips are truncated to the shortest one.
pub fn mix_room(
    utterances: &[AudioClip],
    placement: &Placement,
    room: &RoomSpec,
    noise: &NoiseSpec,
) -> Result<AudioClip> {
    let refs: Vec<&[f64]> = utterances.iter().map(|c| c.samples()).collect();
    let rate = match utterances.first() {
        Some(c) => c.sample_rate(),
        None => {
            return Err(Error::InvalidArgument(
                "mixing needs at least one utterance".into(),
            ))
        }
    };
    if let Some(c) = utterances.iter().find(|c| c.sample_rate() != rate) {
        return Err(Error::RateMismatch {
            expected: rate,
            found: c.sample_rate(),
        });
    }
    mix_slices(&refs, rate, placement, room, noise)
}

/// [`mix_room`] over borrowed sample slices sharing `sample_rate`.
pub fn mix_slices(
    sources: &[&[f64]],
    sample_rate: u32,
    placement: &Placement,
    room: &RoomSpec,
    noise: &NoiseSpec,
) -> Result<AudioClip> {
    room.validate()?;
    noise.validate()?;
    if sources.len() != placement.len() {
        return Err(Error::CountMismatch {
            utterances: sources.len(),
            positions: placement.len(),
        });
    }
    if let Some(&r) = placement.distances.iter().find(|&&r| !(r > room.r0)) {
        return Err(Error::TooClose {
            distance: r,
            r0: room.r0,
        });
    }
    let len = sources.iter().map(|s| s.len()).min().unwrap_or(0);
    let mut acc = vec![0.0; len];
    for (src, &r) in sources.iter().zip(&placement.distances) {
        for (a, x) in acc.iter_mut().zip(&src[..len]) {
            *a += x / r;
        }
    }
    let scale = room.a0 * room.r0;
    if noise.std_dev > 0.0 {
        let normal = Normal::new(noise.mean, noise.std_dev)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seed::rng(noise.seed);
        for a in acc.iter_mut() {
            *a = scale * *a + normal.sample(&mut rng);
        }
    } else {
        for a in acc.iter_mut() {
            *a = scale * *a + noise.mean;
        }
    }
    AudioClip::new(acc, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tone(n: usize, f: f64) -> AudioClip {
        AudioClip::new(
            (0..n)
                .map(|i| 0.3 * (2.0 * PI * f * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn room() -> RoomSpec {
        RoomSpec::default()
    }

    #[test]
    fn areas() {
        assert_eq!(room_area(&room()), 80.0);
        let circle = RoomSpec {
            shape: RoomShape::Circular { radius_m: 1.0 },
            ..room()
        };
        assert!((room_area(&circle) - PI).abs() < 1e-15);
        let unit = RoomSpec {
            shape: RoomShape::Rectangular {
                length_m: 1.0,
                width_m: 1.0,
            },
            r0: 0.1,
            ..room()
        };
        assert_eq!(room_area(&unit), 1.0);
    }

    #[test]
    fn density_cap() {
        assert_eq!(place_speakers(&room(), 80, 1).unwrap().len(), 80);
        assert!(matches!(
            place_speakers(&room(), 81, 1),
            Err(Error::DensityViolation {
                requested: 81,
                cap: 80
            })
        ));
        assert!(place_speakers(&room(), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn invalid_rooms() {
        let corner_circle = RoomSpec {
            shape: RoomShape::Circular { radius_m: 3.0 },
            mic: MicPosition::Corner,
            ..room()
        };
        assert!(corner_circle.validate().is_err());
        assert!(RoomSpec { r0: 0.0, ..room() }.validate().is_err());
        assert!(RoomSpec { a0: -1.0, ..room() }.validate().is_err());
    }

    #[test]
    fn placements_satisfy_geometry() {
        let rooms = [
            room(),
            RoomSpec {
                mic: MicPosition::Corner,
                ..room()
            },
            RoomSpec {
                shape: RoomShape::Circular { radius_m: 4.0 },
                ..room()
            },
        ];
        for room in &rooms {
            for s in 0..10_000u64 {
                let p = place_speakers(room, 3, s).unwrap();
                for (pos, &d) in p.positions.iter().zip(&p.distances) {
                    assert!(room.contains(*pos));
                    assert!(d > room.r0);
                }
            }
        }
    }

    #[test]
    fn attenuation_law() {
        let x = tone(1600, 440.0);
        let r = room();
        let near = attenuate(&x, 2.0 * r.r0, &r).unwrap();
        for (a, b) in x.samples().iter().zip(near.samples()) {
            assert!((b - a / 2.0).abs() <= 1e-15);
        }
        let g2 = r.gain(2.0 * r.r0).unwrap();
        let g4 = r.gain(4.0 * r.r0).unwrap();
        assert_eq!(g4, g2 / 2.0);
        assert!((r.gain(r.r0 * (1.0 + 1e-12)).unwrap() - 1.0).abs() < 1e-11);
        assert!(matches!(attenuate(&x, r.r0, &r), Err(Error::TooClose { .. })));
    }

    #[test]
    fn single_speaker_near_r0_is_identity() {
        let r = room();
        let x = tone(800, 300.0);
        let p = Placement::at(&r, vec![[5.0 + r.r0 * 1.001, 4.0]]).unwrap();
        let y = mix_room(&[x.clone()], &p, &r, &NoiseSpec::silent()).unwrap();
        let bound = 1.0 - r.r0 / p.distances[0];
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() <= bound * a.abs() + 1e-15);
        }
    }

    #[test]
    fn mixing_is_linear_without_noise() {
        let r = room();
        let clips = [tone(1000, 200.0), tone(1000, 310.0), tone(1200, 520.0)];
        let p = place_speakers(&r, 3, 9).unwrap();
        let quiet = NoiseSpec::silent();
        let all = mix_room(&clips, &p, &r, &quiet).unwrap();
        let pa = Placement::at(&r, p.positions[..1].to_vec()).unwrap();
        let pb = Placement::at(&r, p.positions[1..].to_vec()).unwrap();
        let a = mix_room(&clips[..1], &pa, &r, &quiet).unwrap();
        let b = mix_room(&clips[1..], &pb, &r, &quiet).unwrap();
        assert_eq!(all.len(), 1000);
        for i in 0..1000 {
            assert!((all.samples()[i] - a.samples()[i] - b.samples()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn mixing_errors() {
        let r = room();
        let p = place_speakers(&r, 2, 1).unwrap();
        let quiet = NoiseSpec::silent();
        assert!(matches!(
            mix_room(&[tone(10, 100.0)], &p, &r, &quiet),
            Err(Error::CountMismatch { .. })
        ));
        let other_rate = AudioClip::silence(10, 8_000).unwrap();
        assert!(matches!(
            mix_room(&[tone(10, 100.0), other_rate], &p, &r, &quiet),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let r = room();
        let p = Placement::at(&r, vec![]).unwrap();
        let noise = NoiseSpec {
            mean: 0.2,
            std_dev: 0.05,
            seed: 3,
        };
        let y = mix_slices(&[], 16_000, &p, &r, &noise).unwrap();
        assert!(y.is_empty());

        let x = AudioClip::silence(100_000, 16_000).unwrap();
        let p = Placement::at(&r, vec![[1.0, 1.0]]).unwrap();
        let y = mix_room(&[x.clone()], &p, &r, &noise).unwrap();
        let n = y.len() as f64;
        let mean = y.samples().iter().sum::<f64>() / n;
        let var = y.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 0.2).abs() < 1e-3);
        assert!((var.sqrt() - 0.05).abs() < 1e-3);
        assert_eq!(y, mix_room(&[x], &p, &r, &noise).unwrap());
    }

    proptest! {
        #[test]
        fn placement_is_deterministic(seed in any::<u64>(), n in 0usize..40) {
            let a = place_speakers(&room(), n, seed).unwrap();
            let b = place_speakers(&room(), n, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
