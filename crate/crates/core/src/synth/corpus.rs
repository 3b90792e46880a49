use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_profile, synth_utterance, SpeakerProfile};
use crate::audio::{wav, AudioClip, DEFAULT_SAMPLE_RATE};
use crate::{seed, Error, Result};

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub speakers: usize,
    pub utterances: usize,
    pub utterance_secs: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            speakers: 20,
            utterances: 4,
            utterance_secs: 5.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpeakerSource {
    Synthetic {
        profile: SpeakerProfile,
        utterance_seeds: Vec<u64>,
    },
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpeaker {
    pub id: String,
    pub source: SpeakerSource,
    pub utterances: Vec<AudioClip>,
}

/// Utterances grouped by speaker, ordered by speaker id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sample_rate: u32,
    speakers: Vec<CorpusSpeaker>,
    master_seed: Option<u64>,
}

impl Corpus {
    pub fn new(mut speakers: Vec<CorpusSpeaker>) -> Result<Self> {
        let rate = speakers
            .iter()
            .flat_map(|s| s.utterances.first())
            .map(|c| c.sample_rate())
            .next()
            .ok_or(Error::EmptyCorpus)?;
        for spk in &speakers {
            if spk.utterances.len() < 2 {
                return Err(Error::TooFewUtterances {
                    speaker: spk.id.clone(),
                    count: spk.utterances.len(),
                });
            }
            if let Some(c) = spk.utterances.iter().find(|c| c.sample_rate() != rate) {
                return Err(Error::MixedSampleRate {
                    expected: rate,
                    found: c.sample_rate(),
                    path: PathBuf::from(&spk.id),
                });
            }
        }
        speakers.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            sample_rate: rate,
            speakers,
            master_seed: None,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn speakers(&self) -> &[CorpusSpeaker] {
        &self.speakers
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.speakers
            .iter()
            .flat_map(|s| &s.utterances)
            .map(|c| c.len())
            .sum()
    }

    /// All utterances in speaker order.
    pub fn utterances(&self) -> impl Iterator<Item = (&str, &AudioClip)> {
        self.speakers
            .iter()
            .flat_map(|s| s.utterances.iter().map(move |c| (s.id.as_str(), c)))
    }

    /// A corpus restricted to the first `n` speakers.
    pub fn take_speakers(&self, n: usize) -> Result<Self> {
        let mut out = Corpus::new(self.speakers.iter().take(n).cloned().collect())?;
        out.master_seed = self.master_seed;
        Ok(out)
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            sample_rate: self.sample_rate,
            master_seed: self.master_seed,
            speakers: self
                .speakers
                .iter()
                .map(|s| {
                    let (profile, seeds, files) = match &s.source {
                        SpeakerSource::Synthetic {
                            profile,
                            utterance_seeds,
                        } => (Some(profile.clone()), Some(utterance_seeds.clone()), None),
                        SpeakerSource::Files(paths) => (
                            None,
                            None,
                            Some(paths.iter().map(|p| p.display().to_string()).collect()),
                        ),
                    };
                    ManifestSpeaker {
                        id: s.id.clone(),
                        utterance_secs: s.utterances.iter().map(|c| c.duration()).collect(),
                        profile,
                        utterance_seeds: seeds,
                        files,
                    }
                })
                .collect(),
        }
    }

    /// Write `<speaker_id>_<utt>.wav` files and `manifest.json` into `dir`.
    pub fn write_directory(&self, dir: impl AsRef<Path>) -> Result<CorpusManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for spk in &self.speakers {
            for (j, clip) in spk.utterances.iter().enumerate() {
                wav::write_wav(dir.join(format!("{}_{:02}.wav", spk.id, j)), clip)?;
            }
        }
        let manifest = self.manifest();
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

pub const MANIFEST_FORMAT: &str = "occupancy-corpus-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub version: u32,
    pub sample_rate: u32,
    pub master_seed: Option<u64>,
    pub speakers: Vec<ManifestSpeaker>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSpeaker {
    pub id: String,
    pub utterance_secs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<SpeakerProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utterance_seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub files: Option<Vec<String>>,
}

/// Build a synthetic corpus.
///
/// Speaker `i` is named `spk{i:03}` and seeded with
/// `derive(seed, "speaker/<id>")`; its utterance `j` uses
/// `derive(speaker_seed, "utterance/<j>")`.
pub fn build_corpus(params: &CorpusParams) -> Result<Corpus> {
    if params.speakers == 0 {
        return Err(Error::InvalidArgument("corpus needs at least one speaker".into()));
    }
    if params.utterances < 2 {
        return Err(Error::InvalidArgument(
            "corpus needs at least two utterances per speaker".into(),
        ));
    }
    if params.sample_rate == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let speakers = (0..params.speakers)
        .map(|i| {
            let id = format!("spk{i:03}");
            let speaker_seed = seed::derive(params.seed, &format!("speaker/{id}"));
            let profile = generate_profile(&id, speaker_seed);
            let utterance_seeds: Vec<u64> = (0..params.utterances)
                .map(|j| seed::derive(speaker_seed, &format!("utterance/{j}")))
                .collect();
            let utterances = utterance_seeds
                .iter()
                .map(|&s| synth_utterance(&profile, params.utterance_secs, s, params.sample_rate))
                .collect::<Result<Vec<_>>>()?;
            Ok(CorpusSpeaker {
                id,
                source: SpeakerSource::Synthetic {
                    profile,
                    utterance_seeds,
                },
                utterances,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut corpus = Corpus::new(speakers)?;
    corpus.master_seed = Some(params.seed);
    Ok(corpus)
}

/// Load a directory of `<speaker_id>_<utt>.wav` files.
pub fn ingest_directory(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut rate = None;
    let mut groups: BTreeMap<String, Vec<(String, PathBuf, AudioClip)>> = BTreeMap::new();
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::BadFileName(path.display().to_string()))?;
        let (speaker, utt) = stem
            .rsplit_once('_')
            .filter(|(s, u)| !s.is_empty() && !u.is_empty())
            .ok_or_else(|| Error::BadFileName(path.display().to_string()))?;
        let clip = wav::read_wav(&path)?;
        match rate {
            None => rate = Some(clip.sample_rate()),
            Some(r) if r != clip.sample_rate() => {
                return Err(Error::MixedSampleRate {
                    expected: r,
                    found: clip.sample_rate(),
                    path,
                })
            }
            _ => {}
        }
        groups
            .entry(speaker.to_string())
            .or_default()
            .push((utt.to_string(), path.clone(), clip));
    }

    let speakers = groups
        .into_iter()
        .map(|(id, mut utts)| {
            utts.sort_by(|a, b| a.0.cmp(&b.0));
            let (paths, utterances) = utts.into_iter().map(|(_, p, c)| (p, c)).unzip();
            CorpusSpeaker {
                id,
                source: SpeakerSource::Files(paths),
                utterances,
            }
        })
        .collect();
    Corpus::new(speakers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusParams {
        CorpusParams {
            speakers: 3,
            utterances: 2,
            utterance_secs: 0.5,
            ..CorpusParams::default()
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_corpus(&small()).unwrap();
        let b = build_corpus(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_samples(), 3 * 2 * 8000);
    }

    #[test]
    fn utterances_of_a_speaker_differ() {
        let c = build_corpus(&small()).unwrap();
        for spk in c.speakers() {
            let (x, y) = (&spk.utterances[0], &spk.utterances[1]);
            let differing = x
                .samples()
                .iter()
                .zip(y.samples())
                .filter(|(a, b)| a != b)
                .count();
            assert!(differing > x.len() / 2);
        }
    }

    #[test]
    fn invalid_counts() {
        let mut p = small();
        p.utterances = 1;
        assert!(build_corpus(&p).is_err());
        p.utterances = 2;
        p.speakers = 0;
        assert!(build_corpus(&p).is_err());
    }

    #[test]
    fn ingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let built = build_corpus(&CorpusParams {
            speakers: 2,
            ..small()
        })
        .unwrap();
        built.write_directory(dir.path()).unwrap();
        let loaded = ingest_directory(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.speakers()[0].id, "spk000");
        assert_eq!(loaded.speakers()[1].utterances.len(), 2);
        assert_eq!(loaded.sample_rate(), 16_000);
    }

    #[test]
    fn ingest_rejects_mixed_rates() {
        let dir = tempfile::tempdir().unwrap();
        let a = AudioClip::silence(160, 16_000).unwrap();
        let b = AudioClip::silence(80, 8_000).unwrap();
        wav::write_wav(dir.path().join("alice_1.wav"), &a).unwrap();
        wav::write_wav(dir.path().join("alice_2.wav"), &a).unwrap();
        wav::write_wav(dir.path().join("bob_1.wav"), &a).unwrap();
        wav::write_wav(dir.path().join("bob_2.wav"), &b).unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(Error::MixedSampleRate { .. })
        ));
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_directory(dir.path()), Err(Error::EmptyCorpus)));

        let a = AudioClip::silence(160, 16_000).unwrap();
        wav::write_wav(dir.path().join("carol_1.wav"), &a).unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(Error::TooFewUtterances { .. })
        ));

        fs::write(dir.path().join("carol_2.wav"), b"RIFF").unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(Error::MalformedWav(_))
        ));

        assert!(matches!(
            ingest_directory(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
