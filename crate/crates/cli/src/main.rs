use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occupancy_cli::config::DEFAULT_OUT_DIR;
use occupancy_cli::{run, Command, Overrides, RunConfig};
use occupancy_core::ScoringMode;

/// Room occupancy estimation from audio.
#[derive(Debug, Parser)]
#[command(name = "occupancy", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "OCCUPANCY_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Room shape: 10x8, 10x8:corner or circle:5.
    #[arg(long, global = true)]
    room: Option<String>,
    /// Crowd sizes, e.g. 5,10,20,40,80.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Measurement times in seconds, e.g. 5,10,15.
    #[arg(long, global = true, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Evaluation trials per cell.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// mean-ste or frame-kde.
    #[arg(long, global = true)]
    scoring_mode: Option<ScoringMode>,
    /// Mixture counts to sweep; a single value also sets the trained bank's.
    #[arg(long, global = true, value_delimiter = ',')]
    mixtures: Option<Vec<usize>>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Print the resolved configuration.
    Config,
    /// Write a synthetic speech corpus.
    Synth,
    /// Read a directory of <speaker>_<utt>.wav files and write its manifest.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Fit the per-size energy calibration.
    Calibrate,
    /// Estimate the crowd size of a recording.
    Estimate {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Write one simulated crowd recording.
    SimulateCrowd {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
    },
    /// Accuracy matrix over crowd sizes and measurement times.
    EvalParty {
        /// Reuse a calibration instead of fitting one.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Enrol the corpus speakers.
    TrainSpeakers,
    /// Identify the speaker of a clip or of every clip in a directory.
    Recognize {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Mixture-count sweep and simulated meetings.
    EvalSpeakers,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let command = match cli.command {
        Cmd::Config => Command::Config,
        Cmd::Synth => Command::Synth,
        Cmd::Ingest { dir } => Command::Ingest { dir },
        Cmd::Calibrate => Command::Calibrate,
        Cmd::Estimate { clip, calibration } => Command::Estimate { clip, calibration },
        Cmd::SimulateCrowd { size, duration } => Command::SimulateCrowd { size, duration },
        Cmd::EvalParty { calibration } => Command::EvalParty { calibration },
        Cmd::TrainSpeakers => Command::TrainSpeakers,
        Cmd::Recognize { bank, input } => Command::Recognize { bank, input },
        Cmd::EvalSpeakers => Command::EvalSpeakers,
    };
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir,
        room: cli.room,
        sizes: cli.sizes,
        times: cli.times,
        trials: cli.trials,
        scoring_mode: cli.scoring_mode,
        mixtures: cli.mixtures,
    };
    let config = RunConfig::resolve(cli.config.as_deref(), &overrides);
    let out_dir = match &config {
        Ok(c) => c.run.out_dir.clone(),
        Err(_) => overrides.out_dir.clone().unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
    };
    let code = run(&command, config, &out_dir);
    ExitCode::from(code as u8)
}
