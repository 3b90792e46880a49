//! Commands behind the `occupancy` binary.
//!
//! A command computes every artifact in memory ([`execute`]); [`run`] then
//! writes them and the [`RunReport`] from a single thread.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};

mod commands;
pub mod config;
pub mod report;

pub use config::{Overrides, RunConfig};
pub use report::{RunReport, Status, REPORT_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONSTRAINT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] occupancy_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use occupancy_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::InvalidSpec(_)
                | E::InvalidArgument(_)
                | E::InvalidRoom(_)
                | E::LdaDimension { .. } => EXIT_CONFIG,
                E::Io { .. }
                | E::MalformedWav(_)
                | E::UnsupportedFormat(_)
                | E::EmptyCorpus
                | E::MixedSampleRate { .. }
                | E::BadFileName(_)
                | E::Json(_)
                | E::Document(_) => EXIT_IO,
                E::DensityViolation { .. }
                | E::TooClose { .. }
                | E::CountMismatch { .. }
                | E::RateMismatch { .. }
                | E::FrameSpecMismatch { .. }
                | E::TooFewUtterances { .. }
                | E::ClipTooShort { .. }
                | E::TooFewSamples { .. }
                | E::TooFewFrames { .. }
                | E::ZeroSpread
                | E::RankDeficient(_)
                | E::SingleClass
                | E::NoFeatures
                | E::AllSegmentsTooShort { .. } => EXIT_CONSTRAINT,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// Print the resolved configuration as TOML.
    Config,
    Synth,
    Ingest { dir: PathBuf },
    Calibrate,
    Estimate { clip: PathBuf, calibration: PathBuf },
    SimulateCrowd { size: usize, duration: f64 },
    EvalParty { calibration: Option<PathBuf> },
    TrainSpeakers,
    Recognize { bank: PathBuf, input: PathBuf },
    EvalSpeakers,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Config => "config",
            Command::Synth => "synth",
            Command::Ingest { .. } => "ingest",
            Command::Calibrate => "calibrate",
            Command::Estimate { .. } => "estimate",
            Command::SimulateCrowd { .. } => "simulate-crowd",
            Command::EvalParty { .. } => "eval-party",
            Command::TrainSpeakers => "train-speakers",
            Command::Recognize { .. } => "recognize",
            Command::EvalSpeakers => "eval-speakers",
        }
    }
}

/// A file to write, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

/// Everything a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Text for standard output.
    pub stdout: String,
    pub summary: serde_json::Value,
    pub warnings: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub timings: BTreeMap<String, f64>,
}

impl Outcome {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.artifacts.push(Artifact {
            path: path.into(),
            bytes: bytes.into(),
        });
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        info!("{stage}: {secs:.2} s");
        *self.timings.entry(stage.into()).or_default() += secs;
        out
    }

    fn seed(&mut self, cfg: &RunConfig, key: &str) -> u64 {
        let s = cfg.seed_for(key);
        self.seeds.insert(key.into(), s);
        s
    }
}

/// Run a command without touching the output directory.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    match command {
        Command::Config => {
            out.stdout = cfg.to_toml()?;
            out.add("config.toml", out.stdout.clone());
        }
        Command::Synth => commands::synth(cfg, &mut out)?,
        Command::Ingest { dir } => commands::ingest(dir, &mut out)?,
        Command::Calibrate => commands::calibrate(cfg, &mut out).map(|_| ())?,
        Command::Estimate { clip, calibration } => {
            commands::estimate(cfg, clip, calibration, &mut out)?
        }
        Command::SimulateCrowd { size, duration } => {
            commands::simulate_crowd(cfg, *size, *duration, &mut out)?
        }
        Command::EvalParty { calibration } => {
            commands::eval_party(cfg, calibration.as_deref(), &mut out)?
        }
        Command::TrainSpeakers => commands::train_speakers(cfg, &mut out)?,
        Command::Recognize { bank, input } => commands::recognize(bank, input, &mut out)?,
        Command::EvalSpeakers => commands::eval_speakers(cfg, &mut out)?,
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

/// Execute, write artifacts and the report, and return the exit code.
///
/// `config` carries the resolution error when the configuration was
/// rejected; `out_dir` is where the report goes in that case.
pub fn run(command: &Command, config: Result<RunConfig, CliError>, out_dir: &Path) -> i32 {
    let started = Instant::now();
    let (mut report, result) = match config {
        Ok(cfg) => {
            let mut report = RunReport::new(command.name(), Some(cfg.clone()));
            let result = execute(command, &cfg).and_then(|out| {
                for a in &out.artifacts {
                    write_file(&out_dir.join(&a.path), &a.bytes)?;
                }
                Ok(out)
            });
            if let Ok(out) = &result {
                report.artifacts = out.artifacts.iter().map(|a| a.path.display().to_string()).collect();
                report.summary = out.summary.clone();
                report.warnings = out.warnings.clone();
                report.seeds = out.seeds.clone();
                report.timings_secs = out.timings.clone();
                print!("{}", out.stdout);
            }
            (report, result.map(|_| ()))
        }
        Err(e) => (RunReport::new(command.name(), None), Err(e)),
    };
    report
        .timings_secs
        .insert("total".into(), started.elapsed().as_secs_f64());
    if let Err(e) = &result {
        error!("{e}");
        eprintln!("error: {e}");
        report.status = Status::Failed;
        report.exit_code = e.exit_code();
        report.error = Some(e.to_string());
    }
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    if let Err(e) = write_file(&out_dir.join(REPORT_FILE), text.as_bytes()) {
        eprintln!("error: cannot write run report: {e}");
        if report.exit_code == EXIT_OK {
            return EXIT_IO;
        }
    }
    report.exit_code
}
