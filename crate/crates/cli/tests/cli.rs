use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use occupancy_cli::config::{parse_room, Overrides, RunConfig};
use occupancy_cli::{RunReport, Status, EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_IO};
use occupancy_core::audio::{wav, AudioClip};
use occupancy_core::room::{MicPosition, RoomShape};
use occupancy_core::{ScoringMode, SteCalibration, Window};
use proptest::prelude::*;

const SMALL: &str = r#"
[run]
out_dir = "out"

[corpus]
speakers = 4
utterances = 3
utterance_secs = 2.0

[party]
sizes = [2, 4]
times = [1.0, 2.0]
trials = 2
calibration_trials = 4
calibration_secs = 2.0
concentration_trials = 0

[speaker]
train_utterances = 2
pool_sizes = [4]
mixtures = 2
sweep = [1, 2, 4]
meeting_trials = 2

[speaker.meeting]
speakers = 3
"#;

fn occupancy(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occupancy"))
        .current_dir(cwd)
        .env_remove("OCCUPANCY_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn small_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn report(dir: &Path) -> RunReport {
    RunReport::load(&dir.join("run_report.json")).unwrap()
}

#[test]
fn empty_file_gives_documented_defaults() {
    let cfg = RunConfig::from_toml("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.run.seed, 1);
    assert_eq!(cfg.party.sizes, [5, 10, 20, 40, 80]);
    assert_eq!(cfg.party.times, [5.0, 10.0, 15.0, 20.0, 25.0]);
    assert_eq!(cfg.party.trials, 200);
    assert_eq!(cfg.speaker.sweep, [1, 2, 4, 8, 16, 32]);
    assert_eq!(cfg.speaker.meeting.speakers, 10);
    assert_eq!(cfg.frame.window, Window::Hamming);
    assert_eq!(cfg.run.scoring_mode, ScoringMode::MeanSte);
    cfg.validate().unwrap();
}

#[test]
fn unknown_keys_are_config_errors() {
    assert!(RunConfig::from_toml("[party]\nsize = [5]\n").is_err());
    assert!(RunConfig::from_toml("[partee]\n").is_err());
}

#[test]
fn flags_beat_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "[run]\nseed = 4\n[party]\nsizes = [5]\ntrials = 7\n").unwrap();
    let from_file = RunConfig::resolve(Some(&path), &Overrides::default()).unwrap();
    assert_eq!((from_file.run.seed, from_file.party.trials), (4, 7));
    assert_eq!(from_file.party.sizes, [5]);

    let o = Overrides {
        seed: Some(9),
        trials: Some(3),
        room: Some("circle:4".into()),
        mixtures: Some(vec![8]),
        ..Overrides::default()
    };
    let cfg = RunConfig::resolve(Some(&path), &o).unwrap();
    assert_eq!((cfg.run.seed, cfg.party.trials), (9, 3));
    assert_eq!(cfg.party.sizes, [5]);
    assert_eq!(cfg.room.shape, RoomShape::Circular { radius_m: 4.0 });
    assert_eq!((cfg.speaker.mixtures, cfg.speaker.sweep.clone()), (8, vec![8]));
}

#[test]
fn room_flag_forms() {
    assert_eq!(
        parse_room("12x6:corner").unwrap(),
        (RoomShape::Rectangular { length_m: 12.0, width_m: 6.0 }, Some(MicPosition::Corner))
    );
    assert_eq!(parse_room("10x8").unwrap().1, None);
    for bad in ["10", "10x", "circle:", "10x8:ceiling"] {
        assert!(parse_room(bad).is_err(), "{bad}");
    }
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        "[party]\nsizes = []\n",
        "[party]\ntimes = [0.0]\n",
        "[frame]\nstep_ms = 80.0\n",
        "[room]\nr0 = -1.0\n",
        "[speaker]\nsweep = [0]\n",
    ] {
        let cfg = RunConfig::from_toml(text).unwrap();
        assert!(cfg.validate().is_err(), "{text}");
    }
}

#[test]
fn config_command_prints_a_loadable_file() {
    let dir = small_dir();
    let out = occupancy(dir.path(), &["--config", "small.toml", "--seed", "3", "config"]);
    assert!(out.status.success());
    let printed = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(printed.run.seed, 3);
    assert_eq!(printed.corpus.speakers, 4);
    assert_eq!(report(&dir.path().join("out")).config, Some(printed));
}

#[test]
fn synth_writes_80_files_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = occupancy(dir.path(), &["--out-dir", "o", "synth"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let corpus = dir.path().join("o/corpus");
    let wavs = fs::read_dir(&corpus)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav"))
        .count();
    assert_eq!(wavs, 80);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(corpus.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["speakers"].as_array().unwrap().len(), 20);
    let clip = wav::read_wav(corpus.join("spk007_03.wav")).unwrap();
    assert_eq!(clip.len(), 80_000);
    let r = report(&dir.path().join("o"));
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.artifacts.len(), 81);
    assert!(r.seeds.contains_key("corpus"));
}

#[test]
fn environment_sets_the_output_directory() {
    let dir = small_dir();
    let out = Command::new(env!("CARGO_BIN_EXE_occupancy"))
        .current_dir(dir.path())
        .env("OCCUPANCY_OUT_DIR", "from-env")
        .args(["--config", "small.toml", "config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/config.toml").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn single_size_calibration_has_one_entry() {
    let dir = small_dir();
    let out = occupancy(dir.path(), &["--config", "small.toml", "--sizes", "3", "calibrate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cal = SteCalibration::load(dir.path().join("out/calibration.json")).unwrap();
    assert_eq!(cal.sizes(), [3]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn oversized_crowd_is_a_constraint_violation() {
    let dir = small_dir();
    let out = occupancy(dir.path(), &["--config", "small.toml", "--sizes", "5,81", "calibrate"]);
    assert_eq!(out.status.code(), Some(EXIT_CONSTRAINT));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("81") && err.contains("density"), "{err}");
    let r = report(&dir.path().join("out"));
    assert_eq!(r.status, Status::Failed);
    assert_eq!(r.exit_code, EXIT_CONSTRAINT);
    assert!(r.config.is_some());
}

#[test]
fn missing_calibration_is_an_io_error() {
    let dir = small_dir();
    AudioClip::silence(16_000, 16_000)
        .and_then(|c| wav::write_wav(dir.path().join("quiet.wav"), &c))
        .unwrap();
    let out = occupancy(
        dir.path(),
        &["--config", "small.toml", "estimate", "--clip", "quiet.wav", "--calibration", "nope.json"],
    );
    assert_eq!(out.status.code(), Some(EXIT_IO));
    assert!(out.stdout.is_empty());
    assert_eq!(report(&dir.path().join("out")).exit_code, EXIT_IO);
}

#[test]
fn broken_config_still_leaves_a_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[party\n").unwrap();
    let out = occupancy(dir.path(), &["--config", "bad.toml", "--out-dir", "o", "calibrate"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let r = report(&dir.path().join("o"));
    assert_eq!(r.status, Status::Failed);
    assert!(r.config.is_none());
    assert!(r.error.is_some());
}

#[test]
fn estimate_and_frame_spec_mismatch() {
    let dir = small_dir();
    assert!(occupancy(dir.path(), &["--config", "small.toml", "calibrate"]).status.success());
    AudioClip::silence(32_000, 16_000)
        .and_then(|c| wav::write_wav(dir.path().join("quiet.wav"), &c))
        .unwrap();
    let args = ["estimate", "--clip", "quiet.wav", "--calibration", "out/calibration.json"];

    let out = occupancy(dir.path(), &[&["--config", "small.toml"][..], &args].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("predicted 2 speakers"));
    let est: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/estimate.json")).unwrap()).unwrap();
    assert_eq!(est["predicted"], 2);

    fs::write(dir.path().join("other.toml"), format!("{SMALL}\n[frame]\nframe_ms = 40.0\nstep_ms = 20.0\n")).unwrap();
    let out = occupancy(dir.path(), &[&["--config", "other.toml"][..], &args].concat());
    assert_eq!(out.status.code(), Some(EXIT_CONSTRAINT));
    assert!(String::from_utf8(out.stderr).unwrap().contains("frame spec mismatch"));
}

#[test]
fn one_trial_gives_zero_one_cells() {
    let dir = small_dir();
    let out = occupancy(dir.path(), &["--config", "small.toml", "--trials", "1", "eval-party"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/accuracy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("speakers,1,2"));
    for line in lines {
        for cell in line.split(',').skip(1) {
            assert!(cell == "0.0000" || cell == "1.0000", "{cell}");
        }
    }
    let curves = fs::read_to_string(dir.path().join("out/accuracy_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 5);
    assert!(dir.path().join("out/calibration.json").exists());
}

#[test]
fn speakers_train_recognise_and_sweep() {
    let dir = small_dir();
    let cfg = ["--config", "small.toml"];
    assert!(occupancy(dir.path(), &[&cfg[..], &["synth"]].concat()).status.success());
    assert!(occupancy(dir.path(), &[&cfg[..], &["train-speakers"]].concat()).status.success());
    let bank = fs::read_to_string(dir.path().join("out/speaker_bank.json")).unwrap();
    assert!(bank.contains("occupancy-speaker-bank"));

    let out = occupancy(
        dir.path(),
        &[&cfg[..], &["recognize", "--bank", "out/speaker_bank.json", "--input", "out/corpus/spk002_00.wav"]].concat(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/recognitions.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["spk002_00", "spk002"]);

    let out = occupancy(dir.path(), &[&cfg[..], &["eval-speakers"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("out/mixture_sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "speakers,1,2,4");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').count(), 4);

    let out = occupancy(dir.path(), &[&cfg[..], &["--mixtures", "64", "train-speakers"]].concat());
    assert_eq!(out.status.code(), Some(EXIT_CONSTRAINT));
    assert!(String::from_utf8(out.stderr).unwrap().contains("64 mixtures need at least 640"));
    let meetings = fs::read_to_string(dir.path().join("out/meetings.csv")).unwrap();
    assert_eq!(meetings.lines().count(), 3);
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        prop::collection::vec(1usize..80, 1..6),
        prop::collection::vec(0.5f64..30.0, 1..6),
        1usize..500,
        prop::bool::ANY,
        (1.0f64..20.0, 1.0f64..20.0),
        0.1f64..2.0,
        prop::collection::vec(1usize..64, 1..7),
        prop::option::of(1usize..40),
        prop::option::of("[a-z]{1,8}"),
    )
        .prop_map(|(seed, sizes, times, trials, kde, (l, w), r0, sweep, d_lda, dir)| {
            let mut c = RunConfig::default();
            c.run.seed = seed;
            c.run.scoring_mode = if kde { ScoringMode::FrameKde } else { ScoringMode::MeanSte };
            c.party.sizes = sizes;
            c.party.times = times;
            c.party.trials = trials;
            c.room.shape = RoomShape::Rectangular { length_m: l, width_m: w };
            c.room.r0 = r0;
            c.speaker.sweep = sweep;
            c.speaker.d_lda = d_lda;
            c.corpus.dir = dir.map(Into::into);
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_through_toml(cfg in config_strategy()) {
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
