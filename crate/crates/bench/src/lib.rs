//! Shared inputs for the benchmarks.

use occupancy_core::synth::{build_corpus, generate_profile, synth_utterance, CorpusParams};
use occupancy_core::{AudioClip, Corpus};

pub const RATE: u32 = 16_000;

/// One synthetic talker.
pub fn speech(secs: f64, seed: u64) -> AudioClip {
    synth_utterance(&generate_profile("bench", seed), secs, seed, RATE).expect("valid profile")
}

/// Small corpus for crowd simulation.
pub fn corpus(speakers: usize, secs: f64) -> Corpus {
    build_corpus(&CorpusParams {
        speakers,
        utterances: 2,
        utterance_secs: secs,
        ..CorpusParams::default()
    })
    .expect("valid corpus parameters")
}

/// Deterministic pseudo-random feature rows for model fitting.
pub fn feature_rows(n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n)
        .map(|i| (0..dim).map(|j| next() + if (i + j) % 3 == 0 { 1.0 } else { 0.0 }).collect())
        .collect()
}
