use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{train_gmm, GmmModel};
use super::lda::{fit_lda, Lda};
use super::mfcc::{MfccConfig, MfccExtractor};
use super::pca::{fit_pca, Pca};
use crate::audio::AudioClip;
use crate::synth::Corpus;
use crate::{seed, Error, Result};

pub const BANK_FORMAT: &str = "occupancy-speaker-bank";
pub const BANK_VERSION: u32 = 1;

/// Enrollment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub mfcc: MfccConfig,
    pub d_pca: usize,
    /// Discriminant dimensions; `None` uses `speakers - 1` (capped by `d_pca`).
    pub d_lda: Option<usize>,
    pub mixtures: usize,
    pub seed: u64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            mfcc: MfccConfig::default(),
            d_pca: 60,
            d_lda: None,
            mixtures: 16,
            seed: 0,
        }
    }
}

/// Enrolled speakers: shared feature transform plus one mixture each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerBank {
    pub format: String,
    pub version: u32,
    pub config: BankConfig,
    pub pca: Pca,
    /// Absent when only one speaker is enrolled.
    pub lda: Option<Lda>,
    pub models: BTreeMap<String, GmmModel>,
}

impl SpeakerBank {
    pub fn speakers(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn feature_dim(&self) -> usize {
        self.lda
            .as_ref()
            .map_or(self.pca.output_dim(), Lda::output_dim)
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let p = self.pca.project(x);
        match &self.lda {
            Some(l) => l.project(&p),
            None => p,
        }
    }

    /// Transformed speech features of a clip.
    pub fn features(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let raw = MfccExtractor::new(&self.config.mfcc)?.voiced_features(clip)?;
        Ok(raw.iter().map(|x| self.transform(x)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: SpeakerBank = serde_json::from_str(text)?;
        if bank.format != BANK_FORMAT {
            return Err(Error::Document(format!(
                "expected format {BANK_FORMAT}, found {}",
                bank.format
            )));
        }
        if bank.version != BANK_VERSION {
            return Err(Error::Document(format!(
                "unsupported speaker bank version {}",
                bank.version
            )));
        }
        bank.validate()?;
        Ok(bank)
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

    fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Document("speaker bank has no speakers".into()));
        }
        if self.pca.input_dim() != self.config.mfcc.dimension() {
            return Err(Error::Document("transform does not match the MFCC layout".into()));
        }
        if let Some(l) = &self.lda {
            if l.directions.iter().any(|d| d.len() != self.pca.output_dim()) {
                return Err(Error::Document("discriminant and PCA dimensions differ".into()));
            }
        }
        let d = self.feature_dim();
        for (id, m) in &self.models {
            m.validate()
                .map_err(|e| Error::Document(format!("model {id}: {e}")))?;
            if m.dim() != d {
                return Err(Error::Document(format!("model {id} has the wrong dimension")));
            }
        }
        Ok(())
    }
}

/// Training clips per speaker.
pub type Enrollment = BTreeMap<String, Vec<AudioClip>>;

/// Split every speaker's utterances into the first `train` for enrollment
/// and the rest for testing.
pub fn split_corpus(corpus: &Corpus, train: usize) -> Result<(Enrollment, Vec<(String, AudioClip)>)> {
    let mut enroll = Enrollment::new();
    let mut tests = Vec::new();
    for s in corpus.speakers() {
        if train == 0 || s.utterances.len() < train {
            return Err(Error::TooFewUtterances {
                speaker: s.id.clone(),
                count: s.utterances.len(),
            });
        }
        enroll.insert(s.id.clone(), s.utterances[..train].to_vec());
        tests.extend(s.utterances[train..].iter().map(|u| (s.id.clone(), u.clone())));
    }
    Ok((enroll, tests))
}

/// Enrollment features after the shared transform, ready for mixture fits
/// of any size.
#[derive(Debug, Clone)]
pub struct PreparedEnrollment {
    config: BankConfig,
    pca: Pca,
    lda: Option<Lda>,
    features: BTreeMap<String, Vec<Vec<f64>>>,
}

impl PreparedEnrollment {
    /// Extract features, fit PCA on the pooled frames and LDA on their
    /// projections with speaker labels.
    pub fn new(enrollment: &Enrollment, config: &BankConfig) -> Result<Self> {
        if enrollment.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let extractor = MfccExtractor::new(&config.mfcc)?;
        let raw: Vec<(String, Vec<Vec<f64>>)> = enrollment
            .par_iter()
            .map(|(id, clips)| {
                let mut f = Vec::new();
                for c in clips {
                    f.extend(extractor.voiced_features(c)?);
                }
                Ok((id.clone(), f))
            })
            .collect::<Result<_>>()?;
        let pooled: Vec<Vec<f64>> = raw.iter().flat_map(|(_, f)| f.iter().cloned()).collect();
        let pca = fit_pca(&pooled, config.d_pca)?;
        let projected: Vec<(String, Vec<Vec<f64>>)> = raw
            .into_par_iter()
            .map(|(id, f)| (id, f.iter().map(|x| pca.project(x)).collect()))
            .collect();

        let lda = if projected.len() < 2 {
            None
        } else {
            let d_lda = config
                .d_lda
                .unwrap_or_else(|| (projected.len() - 1).min(config.d_pca));
            let mut data = Vec::with_capacity(pooled.len());
            let mut labels = Vec::with_capacity(pooled.len());
            for (i, (_, f)) in projected.iter().enumerate() {
                data.extend(f.iter().cloned());
                labels.extend(std::iter::repeat_n(i, f.len()));
            }
            Some(fit_lda(&data, &labels, d_lda)?)
        };
        let features = projected
            .into_par_iter()
            .map(|(id, f)| {
                let f = match &lda {
                    Some(l) => f.iter().map(|x| l.project(x)).collect(),
                    None => f,
                };
                (id, f)
            })
            .collect();
        Ok(Self {
            config: *config,
            pca,
            lda,
            features,
        })
    }

    /// Fit one `mixtures`-component model per speaker. Speaker `s` uses
    /// `derive(seed, "gmm/<s>")`. Also returns each speaker's EM trace.
    pub fn bank(&self, mixtures: usize) -> Result<(SpeakerBank, BTreeMap<String, Vec<f64>>)> {
        let fitted: Vec<(String, GmmModel, Vec<f64>)> = self
            .features
            .par_iter()
            .map(|(id, f)| {
                let g = train_gmm(f, mixtures, seed::derive(self.config.seed, &format!("gmm/{id}"))).map_err(
                    |e| match e {
                        Error::TooFewSamples { needed, got } => Error::TooFewFrames {
                            speaker: id.clone(),
                            mixtures,
                            frames: got,
                            needed,
                        },
                        e => e,
                    },
                )?;
                Ok((id.clone(), g.model, g.log_likelihood))
            })
            .collect::<Result<_>>()?;
        let mut models = BTreeMap::new();
        let mut traces = BTreeMap::new();
        for (id, m, t) in fitted {
            models.insert(id.clone(), m);
            traces.insert(id, t);
        }
        let bank = SpeakerBank {
            format: BANK_FORMAT.into(),
            version: BANK_VERSION,
            config: BankConfig {
                mixtures,
                ..self.config
            },
            pca: self.pca.clone(),
            lda: self.lda.clone(),
            models,
        };
        Ok((bank, traces))
    }
}

/// Enroll speakers with `config.mixtures` components each.
pub fn train_bank(enrollment: &Enrollment, config: &BankConfig) -> Result<SpeakerBank> {
    Ok(PreparedEnrollment::new(enrollment, config)?
        .bank(config.mixtures)?
        .0)
}

/// Outcome of recognising one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub speaker: String,
    /// Summed frame log-likelihood per enrolled speaker.
    pub scores: BTreeMap<String, f64>,
    pub frames: usize,
}

impl Recognition {
    /// The `n` best (speaker, score) pairs, best first; ties by id.
    pub fn top(&self, n: usize) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.scores.iter().map(|(k, &s)| (k.as_str(), s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v.truncate(n);
        v
    }
}

/// Score transformed features against every enrolled speaker.
pub fn recognize_features(features: &[Vec<f64>], bank: &SpeakerBank) -> Result<Recognition> {
    if features.is_empty() {
        return Err(Error::NoFeatures);
    }
    let scores: BTreeMap<String, f64> = bank
        .models
        .iter()
        .map(|(id, m)| (id.clone(), m.total_log_likelihood(features)))
        .collect();
    let mut best: Option<(&String, f64)> = None;
    for (id, &s) in &scores {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((id, s)),
        }
    }
    let speaker = best.map(|(id, _)| id.clone()).ok_or(Error::NoFeatures)?;
    Ok(Recognition {
        speaker,
        scores,
        frames: features.len(),
    })
}

/// Most likely enrolled speaker of a clip under a uniform speaker prior.
pub fn recognize(clip: &AudioClip, bank: &SpeakerBank) -> Result<Recognition> {
    recognize_features(&bank.features(clip)?, bank)
}

/// One mixture count of a recognition sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mixtures: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Whether every speaker's EM log-likelihood never decreased.
    pub em_monotone: bool,
}

/// Held-out recognition accuracy for several mixture counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSweep {
    pub speakers: usize,
    pub rows: Vec<SweepRow>,
}

impl MixtureSweep {
    /// Row with the highest accuracy; ties go to fewer mixtures.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if r.accuracy <= b.accuracy => Some(b),
            _ => Some(r),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mixtures,speakers,correct,total,accuracy,em_monotone\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{}\n",
                r.mixtures, self.speakers, r.correct, r.total, r.accuracy, r.em_monotone
            ));
        }
        out
    }
}

/// Train a bank per mixture count and score the held-out clips.
pub fn sweep_mixtures(
    prepared: &PreparedEnrollment,
    tests: &[(String, AudioClip)],
    mixtures: &[usize],
) -> Result<MixtureSweep> {
    if tests.is_empty() {
        return Err(Error::InvalidArgument("no held-out utterances to score".into()));
    }
    let mut rows = Vec::with_capacity(mixtures.len());
    let mut test_features: Option<Vec<Vec<Vec<f64>>>> = None;
    for &k in mixtures {
        let (bank, traces) = prepared.bank(k)?;
        let feats = match &test_features {
            Some(f) => f,
            None => test_features.insert(
                tests
                    .par_iter()
                    .map(|(_, c)| bank.features(c))
                    .collect::<Result<_>>()?,
            ),
        };
        let correct = feats
            .par_iter()
            .zip(tests)
            .map(|(f, (id, _))| Ok((recognize_features(f, &bank)?.speaker == *id) as usize))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        rows.push(SweepRow {
            mixtures: k,
            correct,
            total: tests.len(),
            accuracy: correct as f64 / tests.len() as f64,
            em_monotone: traces
                .values()
                .all(|t| t.windows(2).all(|w| w[1] >= w[0] - 1e-8)),
        });
    }
    Ok(MixtureSweep {
        speakers: prepared.features.len(),
        rows,
    })
}
