//! Run configuration: TOML file, command-line overrides, defaults.

use std::path::{Path, PathBuf};

use occupancy_core::room::{MicPosition, RoomShape};
use occupancy_core::speaker::{BankConfig, MeetingParams};
use occupancy_core::synth::CorpusParams;
use occupancy_core::{seed, CrowdModel, FrameSpec, MfccConfig, NoiseSpec, RoomSpec, ScoringMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_OUT_DIR: &str = "occupancy-out";

/// Everything a command needs. Every field has a default, so an empty file
/// is a valid configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub room: RoomSpec,
    pub noise: NoiseSection,
    pub frame: FrameSpec,
    pub crowd: CrowdModel,
    pub corpus: CorpusSection,
    pub party: PartySection,
    pub speaker: SpeakerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Master seed; every random stream of the run is derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scoring_mode: ScoringMode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            scoring_mode: ScoringMode::default(),
        }
    }
}

/// Background noise. Its seed comes from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub mean: f64,
    pub std_dev: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            mean: n.mean,
            std_dev: n.std_dev,
        }
    }
}

/// Synthetic corpus parameters, or a directory of `<speaker>_<utt>.wav` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub speakers: usize,
    pub utterances: usize,
    pub utterance_secs: f64,
    pub sample_rate: u32,
    /// When set, the corpus is read from this directory instead of synthesised.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let p = CorpusParams::default();
        Self {
            speakers: p.speakers,
            utterances: p.utterances,
            utterance_secs: p.utterance_secs,
            sample_rate: p.sample_rate,
            dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartySection {
    pub sizes: Vec<usize>,
    pub times: Vec<f64>,
    /// Evaluation recordings per (size, time) cell.
    pub trials: usize,
    pub calibration_trials: usize,
    pub calibration_secs: f64,
    /// Recordings per size for the mean-STE spread report; 0 skips it.
    pub concentration_trials: usize,
    pub concentration_times: Vec<f64>,
}

impl Default for PartySection {
    fn default() -> Self {
        Self {
            sizes: vec![5, 10, 20, 40, 80],
            times: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            trials: 200,
            calibration_trials: 200,
            calibration_secs: 5.0,
            concentration_trials: 100,
            concentration_times: vec![5.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeakerSection {
    /// Utterances per speaker used for enrolment; the rest are held out.
    pub train_utterances: usize,
    pub d_pca: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_lda: Option<usize>,
    /// Mixture count of the trained bank and of the meeting evaluation.
    pub mixtures: usize,
    pub sweep: Vec<usize>,
    pub pool_sizes: Vec<usize>,
    pub meeting_trials: usize,
    pub min_frames: usize,
    pub meeting: MeetingParams,
    pub mfcc: MfccConfig,
}

impl Default for SpeakerSection {
    fn default() -> Self {
        let b = BankConfig::default();
        Self {
            train_utterances: 3,
            d_pca: b.d_pca,
            d_lda: b.d_lda,
            mixtures: b.mixtures,
            sweep: vec![1, 2, 4, 8, 16, 32],
            pool_sizes: vec![20],
            meeting_trials: 100,
            min_frames: 1,
            meeting: MeetingParams::default(),
            mfcc: b.mfcc,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub room: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub times: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub scoring_mode: Option<ScoringMode>,
    pub mixtures: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialise config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Resolve the configuration: defaults, then the file, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.run.out_dir = d.clone();
        }
        if let Some(r) = &o.room {
            let (shape, mic) = parse_room(r)?;
            self.room.shape = shape;
            if let Some(mic) = mic {
                self.room.mic = mic;
            }
        }
        if let Some(s) = &o.sizes {
            self.party.sizes = s.clone();
        }
        if let Some(t) = &o.times {
            self.party.times = t.clone();
        }
        if let Some(t) = o.trials {
            self.party.trials = t;
        }
        if let Some(m) = o.scoring_mode {
            self.run.scoring_mode = m;
        }
        if let Some(k) = &o.mixtures {
            self.speaker.sweep = k.clone();
            if let [one] = k.as_slice() {
                self.speaker.mixtures = *one;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let core = |e: occupancy_core::Error| CliError::Config(e.to_string());
        self.room.validate().map_err(core)?;
        self.frame.validate().map_err(core)?;
        self.crowd.validate().map_err(core)?;
        self.noise_spec().validate().map_err(core)?;
        self.speaker.mfcc.validate().map_err(core)?;
        let bad = |m: &str| Err(CliError::Config(m.into()));
        let p = &self.party;
        if p.sizes.is_empty() || p.sizes.contains(&0) {
            return bad("party.sizes must be non-empty and positive");
        }
        let positive = |t: &f64| t.is_finite() && *t > 0.0;
        if p.times.is_empty() || !p.times.iter().all(positive) {
            return bad("party.times must be non-empty and positive");
        }
        if !p.concentration_times.iter().all(positive) {
            return bad("party.concentration_times must be positive");
        }
        if p.trials == 0 || p.calibration_trials == 0 {
            return bad("trial counts must be positive");
        }
        if !positive(&p.calibration_secs) {
            return bad("party.calibration_secs must be positive");
        }
        let c = &self.corpus;
        if c.speakers == 0 || c.utterances < 2 || !positive(&c.utterance_secs) || c.sample_rate == 0
        {
            return bad("corpus needs speakers, two or more utterances, a length and a rate");
        }
        let s = &self.speaker;
        if s.train_utterances == 0 {
            return bad("speaker.train_utterances must be positive");
        }
        if s.mixtures == 0 || s.sweep.is_empty() || s.sweep.contains(&0) {
            return bad("mixture counts must be positive");
        }
        if s.pool_sizes.contains(&0) {
            return bad("speaker.pool_sizes must be positive");
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            mean: self.noise.mean,
            std_dev: self.noise.std_dev,
            seed: self.seed_for("noise"),
        }
    }

    pub fn corpus_params(&self) -> CorpusParams {
        CorpusParams {
            speakers: self.corpus.speakers,
            utterances: self.corpus.utterances,
            utterance_secs: self.corpus.utterance_secs,
            sample_rate: self.corpus.sample_rate,
            seed: self.seed_for("corpus"),
        }
    }

    pub fn bank_config(&self, mixtures: usize) -> BankConfig {
        BankConfig {
            mfcc: self.speaker.mfcc,
            d_pca: self.speaker.d_pca,
            d_lda: self.speaker.d_lda,
            mixtures,
            seed: self.seed_for("bank"),
        }
    }

    /// Seed of the named stream, `derive(master, key)`.
    pub fn seed_for(&self, key: &str) -> u64 {
        seed::derive(self.run.seed, key)
    }
}

/// `10x8`, `10x8:corner`, `circle:5`.
pub fn parse_room(text: &str) -> Result<(RoomShape, Option<MicPosition>), CliError> {
    let bad = || CliError::Config(format!("cannot parse room {text:?}; try 10x8, 10x8:corner or circle:5"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let Some(r) = text.strip_prefix("circle:") {
        return Ok((RoomShape::Circular { radius_m: num(r)? }, None));
    }
    let (dims, mic) = match text.split_once(':') {
        Some((d, "corner")) => (d, Some(MicPosition::Corner)),
        Some((d, "center")) => (d, Some(MicPosition::Center)),
        Some(_) => return Err(bad()),
        None => (text, None),
    };
    let (l, w) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        RoomShape::Rectangular {
            length_m: num(l)?,
            width_m: num(w)?,
        },
        mic,
    ))
}
