use std::sync::OnceLock;

use occupancy_core::audio::{make_window, short_time_energy, ste_series};
use occupancy_core::crowd::{calibrate, estimate_occupancy, fit_kde, CrowdSimulator};
use occupancy_core::room::{mix_room, place_speakers, Placement};
use occupancy_core::synth::{build_corpus, generate_profile, synth_utterance, CorpusParams};
use occupancy_core::{
    AudioClip, Corpus, CrowdModel, Error, FrameSpec, NoiseSpec, RoomShape, RoomSpec, ScoringMode,
    SteCalibration, Window,
};
use proptest::prelude::*;

const RATE: u32 = 16_000;

fn window_kind() -> impl Strategy<Value = Window> {
    prop_oneof![Just(Window::Hamming), Just(Window::Rectangular)]
}

fn clip(samples: Vec<f64>) -> AudioClip {
    AudioClip::new(samples, RATE).unwrap()
}

fn small_corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        build_corpus(&CorpusParams {
            speakers: 3,
            utterances: 2,
            utterance_secs: 1.0,
            seed: 11,
            ..CorpusParams::default()
        })
        .unwrap()
    })
}

fn singleton_calibration() -> &'static SteCalibration {
    static CAL: OnceLock<SteCalibration> = OnceLock::new();
    CAL.get_or_init(|| {
        let sim = CrowdSimulator::new(
            small_corpus(),
            RoomSpec::default(),
            NoiseSpec::default().with_seed(2),
            CrowdModel::default(),
        )
        .unwrap();
        let spec = FrameSpec::new(50.0, 25.0, Window::Hamming).unwrap();
        calibrate(&sim, &spec, &[7], 3, 1.0, 5).unwrap()
    })
}

/// Direct evaluation of `a0 * r0 * sum_i x_i / r_i`.
fn decay_oracle(clips: &[Vec<f64>], distances: &[f64], room: &RoomSpec) -> Vec<f64> {
    let len = clips.iter().map(Vec::len).min().unwrap();
    (0..len)
        .map(|t| {
            clips
                .iter()
                .zip(distances)
                .map(|(c, r)| room.a0 * room.r0 * c[t] / r)
                .sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ste_is_never_negative(
        frame in prop::collection::vec(-1.0f64..1.0, 1..600),
        kind in window_kind(),
    ) {
        let w = make_window(kind, frame.len()).unwrap();
        prop_assert!(short_time_energy(&frame, &w).unwrap() >= 0.0);
    }

    #[test]
    fn ste_scales_quadratically(
        samples in prop::collection::vec(-1.0f64..1.0, 800..4000),
        c in 0.01f64..10.0,
        kind in window_kind(),
    ) {
        let spec = FrameSpec::new(50.0, 25.0, kind).unwrap();
        let base = ste_series(&clip(samples.clone()), &spec).unwrap();
        let scaled = ste_series(&clip(samples.iter().map(|x| c * x).collect()), &spec).unwrap();
        prop_assert_eq!(base.len(), scaled.len());
        for (a, b) in base.values.iter().zip(&scaled.values) {
            prop_assert!((b - c * c * a).abs() <= 1e-12 * (c * c * a).abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn hamming_is_symmetric_with_fixed_ends(n in 2usize..2048) {
        let w = make_window(Window::Hamming, n).unwrap();
        prop_assert!((w[0] - 0.08).abs() < 1e-12 && (w[n - 1] - 0.08).abs() < 1e-12);
        for k in 0..n {
            prop_assert!((w[k] - w[n - 1 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_distance_halves_the_peak(
        samples in prop::collection::vec(-1.0f64..1.0, 16..256),
        d in 1.01f64..2.0,
    ) {
        let room = RoomSpec::default();
        let mic = room.mic_coords();
        let peak = |r: f64| {
            let p = Placement::at(&room, vec![[mic[0] + r, mic[1]]]).unwrap();
            let out = mix_room(&[clip(samples.clone())], &p, &room, &NoiseSpec::silent()).unwrap();
            out.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let (near, far) = (peak(d), peak(2.0 * d));
        prop_assert!((near - 2.0 * far).abs() <= 1e-12 * near);
    }

    #[test]
    fn noiseless_mix_follows_the_decay_law(
        clips in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 32..128), 1..8),
        seed in any::<u64>(),
    ) {
        let room = RoomSpec { a0: 0.7, ..RoomSpec::default() };
        let placement = place_speakers(&room, clips.len(), seed).unwrap();
        let audio: Vec<AudioClip> = clips.iter().cloned().map(clip).collect();
        let out = mix_room(&audio, &placement, &room, &NoiseSpec::silent()).unwrap();
        let want = decay_oracle(&clips, &placement.distances, &room);
        prop_assert_eq!(out.len(), want.len());
        for (a, b) in out.samples().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn placement_respects_the_density_cap(
        length in 2.0f64..15.0,
        width in 2.0f64..15.0,
        extra in 1usize..5,
        seed in any::<u64>(),
    ) {
        let room = RoomSpec {
            shape: RoomShape::Rectangular { length_m: length, width_m: width },
            ..RoomSpec::default()
        };
        let cap = (length * width).floor() as usize;
        prop_assert_eq!(room.capacity(), cap);
        let p = place_speakers(&room, cap, seed).unwrap();
        prop_assert_eq!(p.len(), cap);
        prop_assert!(p.distances.iter().all(|&r| r > room.r0));
        let over = place_speakers(&room, cap + extra, seed);
        prop_assert!(
            matches!(over, Err(Error::DensityViolation { .. })),
            "expected a density violation, got {:?}",
            over
        );
    }

    #[test]
    fn kde_integrates_to_one(
        samples in prop::collection::vec(1e-6f64..1.0, 10..400),
        scale in prop::sample::select(vec![1e-4, 1.0, 1e3]),
    ) {
        let xs: Vec<f64> = samples.iter().map(|x| x * x * scale).collect();
        let curve = fit_kde(&xs, None).unwrap();
        prop_assert!((curve.integral() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn profiles_are_valid(seed in any::<u64>(), n in 0usize..1000) {
        let p = generate_profile(&format!("spk{n:03}"), seed);
        prop_assert!((60.0..=400.0).contains(&p.pitch_hz));
        prop_assert!(p.formants.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz));
        prop_assert!(p.rms_target > 0.0 && p.rms_target <= 1.0);
        prop_assert_eq!(generate_profile(&format!("spk{n:03}"), seed), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthesis_is_a_function_of_its_seeds(seed in any::<u64>(), utt in any::<u64>()) {
        let p = generate_profile("spk000", seed);
        let a = synth_utterance(&p, 0.3, utt, RATE).unwrap();
        prop_assert_eq!(a.len(), 4800);
        prop_assert_eq!(synth_utterance(&p, 0.3, utt, RATE).unwrap(), a);
    }

    #[test]
    fn crowd_recordings_are_reproducible(size in 1usize..12, seed in any::<u64>()) {
        let sim = CrowdSimulator::new(
            small_corpus(),
            RoomSpec::default(),
            NoiseSpec::default(),
            CrowdModel::default(),
        )
        .unwrap();
        let a = sim.simulate(size, 0.5, seed).unwrap();
        prop_assert_eq!(sim.simulate(size, 0.5, seed).unwrap(), a);
    }

    #[test]
    fn single_candidate_is_always_chosen(
        amplitude in 0.0f64..1.0,
        secs in 0.05f64..2.0,
        seed in any::<u64>(),
        kde in any::<bool>(),
    ) {
        let mut rng = occupancy_core::seed::rng(seed);
        let n = (secs * RATE as f64) as usize;
        let samples = (0..n).map(|_| amplitude * rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let mode = if kde { ScoringMode::FrameKde } else { ScoringMode::MeanSte };
        let est = estimate_occupancy(&clip(samples), singleton_calibration(), mode).unwrap();
        prop_assert_eq!(est.predicted, 7);
    }
}
