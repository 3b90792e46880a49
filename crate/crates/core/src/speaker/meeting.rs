use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bank::{recognize_features, Enrollment, SpeakerBank};
use crate::audio::AudioClip;
use crate::{seed, Error, Result};

/// Occupancy counted from single-speaker segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingCount {
    pub count: usize,
    /// Recognised speaker per segment; `None` for skipped segments.
    pub labels: Vec<Option<String>>,
    /// Indices of segments with fewer than `min_frames` features.
    pub skipped: Vec<usize>,
}

/// Recognise each segment and count the distinct speakers.
pub fn count_meeting_occupancy(
    segments: &[AudioClip],
    bank: &SpeakerBank,
    min_frames: usize,
) -> Result<MeetingCount> {
    let labels = segments
        .par_iter()
        .map(|clip| {
            let f = match bank.features(clip) {
                Ok(f) => f,
                Err(Error::ClipTooShort { .. }) => Vec::new(),
                Err(e) => return Err(e),
            };
            if f.is_empty() || f.len() < min_frames {
                return Ok(None);
            }
            Ok(Some(recognize_features(&f, bank)?.speaker))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_none()).collect();
    if skipped.len() == labels.len() {
        return Err(Error::AllSegmentsTooShort { min_frames });
    }
    let count = labels.iter().flatten().collect::<BTreeSet<_>>().len();
    Ok(MeetingCount {
        count,
        labels,
        skipped,
    })
}

/// Shape of a simulated meeting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeetingParams {
    pub speakers: usize,
    pub max_turns: usize,
    pub min_turn_secs: f64,
    pub max_turn_secs: f64,
}

impl Default for MeetingParams {
    fn default() -> Self {
        Self {
            speakers: 10,
            max_turns: 3,
            min_turn_secs: 2.0,
            max_turn_secs: 4.0,
        }
    }
}

/// Pre-segmented meeting with the true speaker of each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Meeting {
    pub segments: Vec<AudioClip>,
    pub truth: Vec<String>,
}

impl Meeting {
    pub fn occupants(&self) -> usize {
        self.truth.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Draw `params.speakers` distinct talkers from `pool`; each takes 1 to
/// `max_turns` turns, every turn a random excerpt of one of their clips.
/// Turns are shuffled.
pub fn simulate_meeting(pool: &Enrollment, params: &MeetingParams, seed: u64) -> Result<Meeting> {
    if params.speakers == 0 || params.speakers > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot seat {} of {} speakers",
            params.speakers,
            pool.len()
        )));
    }
    if params.max_turns == 0
        || !(params.min_turn_secs > 0.0 && params.min_turn_secs <= params.max_turn_secs)
    {
        return Err(Error::InvalidArgument("invalid turn settings".into()));
    }
    let mut rng = seed::rng(seed);
    let ids: Vec<&String> = pool.keys().collect();
    let chosen: Vec<&String> = ids.choose_multiple(&mut rng, params.speakers).copied().collect();
    let mut turns = Vec::new();
    for id in chosen {
        let clips = &pool[id];
        if clips.is_empty() {
            return Err(Error::TooFewUtterances {
                speaker: id.clone(),
                count: 0,
            });
        }
        for _ in 0..rng.random_range(1..=params.max_turns) {
            let clip = &clips[rng.random_range(0..clips.len())];
            let secs = rng.random_range(params.min_turn_secs..=params.max_turn_secs);
            let len = ((secs * clip.sample_rate() as f64) as usize).min(clip.len());
            let start = rng.random_range(0..=clip.len() - len);
            let seg = AudioClip::new(clip.samples()[start..start + len].to_vec(), clip.sample_rate())?;
            turns.push((id.clone(), seg));
        }
    }
    turns.shuffle(&mut rng);
    let (truth, segments) = turns.into_iter().unzip();
    Ok(Meeting { segments, truth })
}
