use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use occupancy_core::audio::{wav, AudioClip};
use occupancy_core::crowd::{
    calibrate as run_calibration, estimate_occupancy, evaluate_accuracy, mean_and_std,
    mean_ste_samples, CrowdSimulator,
};
use occupancy_core::speaker::{
    count_meeting_occupancy, recognize as recognize_clip, simulate_meeting, split_corpus,
    sweep_mixtures, train_bank, Enrollment, MixtureSweep, PreparedEnrollment,
};
use occupancy_core::synth::{build_corpus, ingest_directory, Corpus};
use occupancy_core::{Error, SpeakerBank, SteCalibration};
use serde_json::json;

use crate::{CliError, Outcome, RunConfig};

fn pretty<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::Json)? + "\n")
}

fn load_corpus(cfg: &RunConfig, out: &mut Outcome) -> Result<Corpus, CliError> {
    match &cfg.corpus.dir {
        Some(dir) => out.timed("load corpus", || ingest_directory(dir)).map_err(Into::into),
        None => {
            let params = cfg.corpus_params();
            out.seeds.insert("corpus".into(), params.seed);
            out.timed("synthesise corpus", || build_corpus(&params)).map_err(Into::into)
        }
    }
}

fn wav_bytes(clip: &AudioClip, name: &str, out: &mut Outcome) -> Vec<u8> {
    let (bytes, summary) = wav::encode_wav(clip);
    if summary.clamped > 0 {
        let msg = format!("{name}: {} samples clamped to [-1, 1]", summary.clamped);
        warn!("{msg}");
        out.warnings.push(msg);
    }
    bytes
}

pub fn synth(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let params = cfg.corpus_params();
    out.seeds.insert("corpus".into(), params.seed);
    let corpus = out.timed("synthesise corpus", || build_corpus(&params))?;
    let mut files = 0;
    for spk in corpus.speakers() {
        for (j, clip) in spk.utterances.iter().enumerate() {
            let name = format!("{}_{:02}.wav", spk.id, j);
            let bytes = wav_bytes(clip, &name, out);
            out.add(Path::new("corpus").join(name), bytes);
            files += 1;
        }
    }
    out.add("corpus/manifest.json", pretty(&corpus.manifest())?);
    out.summary = json!({
        "speakers": corpus.len(),
        "utterances_per_speaker": params.utterances,
        "files": files,
        "sample_rate": corpus.sample_rate(),
    });
    out.stdout = format!(
        "{} speakers, {files} utterances at {} Hz in corpus/\n",
        corpus.len(),
        corpus.sample_rate()
    );
    Ok(())
}

pub fn ingest(dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let corpus = out.timed("load corpus", || ingest_directory(dir))?;
    let utterances = corpus.utterances().count();
    out.add("ingest_manifest.json", pretty(&corpus.manifest())?);
    out.summary = json!({
        "speakers": corpus.len(),
        "utterances": utterances,
        "sample_rate": corpus.sample_rate(),
        "total_secs": corpus.total_samples() as f64 / corpus.sample_rate() as f64,
    });
    out.stdout = format!(
        "{} speakers, {utterances} utterances at {} Hz\n",
        corpus.len(),
        corpus.sample_rate()
    );
    Ok(())
}

fn simulator<'a>(cfg: &RunConfig, corpus: &'a Corpus) -> Result<CrowdSimulator<'a>, CliError> {
    Ok(CrowdSimulator::new(corpus, cfg.room, cfg.noise_spec(), cfg.crowd)?)
}

fn calibration_artifacts(cal: &SteCalibration, out: &mut Outcome) -> Result<(), CliError> {
    out.add("calibration.json", cal.to_json()? + "\n");
    let mut summary = String::from("speakers,map_level,spread,mean,frame_cov,samples,bandwidth\n");
    let mut curves = String::from("speakers,ste,density\n");
    for (n, c) in &cal.per_size {
        writeln!(
            summary,
            "{n},{:e},{:e},{:e},{:.6},{},{:e}",
            c.map_level,
            c.spread,
            c.mean,
            c.spread / c.mean,
            c.sample_count,
            c.kde.bandwidth
        )
        .unwrap();
        for (x, d) in c.kde.grid.iter().zip(&c.kde.density) {
            writeln!(curves, "{n},{x:e},{d:e}").unwrap();
        }
    }
    out.add("calibration_summary.csv", summary);
    out.add("calibration_curves.csv", curves);
    out.warnings.extend(cal.warnings.iter().cloned());
    Ok(())
}

fn calibration_table(cal: &SteCalibration) -> String {
    let mut t = format!("{:>8} {:>12} {:>12} {:>12}\n", "speakers", "mu", "sigma", "mean");
    for (n, c) in &cal.per_size {
        writeln!(t, "{n:>8} {:>12.4e} {:>12.4e} {:>12.4e}", c.map_level, c.spread, c.mean).unwrap();
    }
    t
}

pub fn calibrate(cfg: &RunConfig, out: &mut Outcome) -> Result<SteCalibration, CliError> {
    let corpus = load_corpus(cfg, out)?;
    let sim = simulator(cfg, &corpus)?;
    let seed = out.seed(cfg, "calibrate");
    let p = &cfg.party;
    let cal = out.timed("calibrate", || {
        run_calibration(&sim, &cfg.frame, &p.sizes, p.calibration_trials, p.calibration_secs, seed)
    })?;
    calibration_artifacts(&cal, out)?;
    out.summary = json!({
        "sizes": cal.sizes(),
        "monotone": cal.is_monotone(),
        "map_level": cal.per_size.values().map(|c| c.map_level).collect::<Vec<_>>(),
        "spread": cal.per_size.values().map(|c| c.spread).collect::<Vec<_>>(),
    });
    out.stdout = calibration_table(&cal);
    Ok(cal)
}

pub fn estimate(
    cfg: &RunConfig,
    clip: &Path,
    calibration: &Path,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let cal = SteCalibration::load(calibration)?;
    if cfg.frame != cal.frame_spec {
        return Err(Error::FrameSpecMismatch {
            calibration: cal.frame_spec.to_string(),
            measurement: cfg.frame.to_string(),
        }
        .into());
    }
    let audio = wav::read_wav(clip)?;
    let est = out.timed("estimate", || estimate_occupancy(&audio, &cal, cfg.run.scoring_mode))?;
    out.add("estimate.json", pretty(&est)?);
    out.summary = serde_json::to_value(&est).map_err(Error::Json)?;
    let mut s = format!(
        "predicted {} speakers from {:.2} s ({} frames, {})\n{:>8} {:>16}\n",
        est.predicted, est.duration, est.frames_used, est.mode, "speakers", "log_score"
    );
    for (n, v) in &est.scores {
        writeln!(s, "{n:>8} {v:>16.4}").unwrap();
    }
    out.stdout = s;
    Ok(())
}

pub fn simulate_crowd(
    cfg: &RunConfig,
    size: usize,
    duration: f64,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, out)?;
    let sim = simulator(cfg, &corpus)?;
    let seed = out.seed(cfg, &format!("crowd-clip/{size}/{duration}"));
    let clip = out.timed("simulate", || sim.simulate(size, duration, seed))?;
    let name = format!("crowd_{size}_{duration}s.wav");
    let bytes = wav_bytes(&clip, &name, out);
    out.add(&name, bytes);
    out.summary = json!({ "size": size, "duration_secs": clip.duration(), "rms": clip.rms() });
    out.stdout = format!("{name}: {size} talkers, {:.2} s\n", clip.duration());
    Ok(())
}

pub fn eval_party(
    cfg: &RunConfig,
    calibration: Option<&Path>,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, out)?;
    let cal = match calibration {
        Some(path) => SteCalibration::load(path)?,
        None => {
            let sim = simulator(cfg, &corpus)?;
            let seed = out.seed(cfg, "calibrate");
            let p = &cfg.party;
            let cal = out.timed("calibrate", || {
                run_calibration(&sim, &cfg.frame, &p.sizes, p.calibration_trials, p.calibration_secs, seed)
            })?;
            calibration_artifacts(&cal, out)?;
            cal
        }
    };
    // Evaluation reuses the calibrated room with fresh seeds.
    let sim = CrowdSimulator::new(&corpus, cal.room, cal.noise, cal.model)?;
    let p = &cfg.party;
    let seed = out.seed(cfg, "evaluate");
    let mode = cfg.run.scoring_mode;
    let matrix = out.timed("evaluate", || {
        evaluate_accuracy(&sim, &cal, &p.sizes, &p.times, p.trials, seed, mode)
    })?;
    out.add("accuracy.csv", matrix.to_csv());
    out.add("accuracy_curves.csv", matrix.curves_csv());

    let mut concentration = serde_json::Value::Null;
    if p.concentration_trials > 0 {
        let times = &p.concentration_times;
        let mut csv = String::from("speakers,frame_mean,frame_std,frame_cov");
        for t in times {
            write!(csv, ",mean_ste_std_{t}s").unwrap();
        }
        csv.push_str(",std_ratio\n");
        let mut ratios = Vec::new();
        for (&n, c) in &cal.per_size {
            let mut stds = Vec::new();
            for &t in times {
                let s = out.seed(cfg, &format!("concentration/{n}/{t}"));
                let means = out.timed("concentration", || {
                    mean_ste_samples(&sim, &cal.frame_spec, n, t, p.concentration_trials, s)
                })?;
                stds.push(mean_and_std(&means).1);
            }
            let ratio = match (stds.first(), stds.last()) {
                (Some(a), Some(b)) if stds.len() > 1 && *a > 0.0 => b / a,
                _ => f64::NAN,
            };
            ratios.push(ratio);
            write!(csv, "{n},{:e},{:e},{:.6}", c.mean, c.spread, c.spread / c.mean).unwrap();
            for s in &stds {
                write!(csv, ",{s:e}").unwrap();
            }
            writeln!(csv, ",{ratio:.4}").unwrap();
        }
        out.add("concentration.csv", csv);
        concentration = json!({ "times": times, "std_ratio": ratios });
    }

    let mut table = format!("{:>8}", "speakers");
    for t in &matrix.times {
        write!(table, " {:>6}", format!("{t}s")).unwrap();
    }
    table.push('\n');
    for (n, row) in matrix.sizes.iter().zip(&matrix.accuracy) {
        write!(table, "{n:>8}").unwrap();
        for a in row {
            write!(table, " {a:>6.3}").unwrap();
        }
        table.push('\n');
    }
    out.stdout = table;
    out.summary = json!({
        "mode": mode.to_string(),
        "sizes": matrix.sizes,
        "times": matrix.times,
        "trials": matrix.trials,
        "accuracy": matrix.accuracy,
        "calibration_monotone": cal.is_monotone(),
        "concentration": concentration,
    });
    Ok(())
}

pub fn train_speakers(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, out)?;
    let (enroll, tests) = split_corpus(&corpus, cfg.speaker.train_utterances)?;
    let bank_cfg = cfg.bank_config(cfg.speaker.mixtures);
    out.seeds.insert("bank".into(), bank_cfg.seed);
    let bank = out.timed("train", || train_bank(&enroll, &bank_cfg))?;
    out.add("speaker_bank.json", bank.to_json()? + "\n");
    out.summary = json!({
        "speakers": bank.models.len(),
        "mixtures": bank_cfg.mixtures,
        "feature_dim": bank.feature_dim(),
        "held_out": tests.len(),
    });
    out.stdout = format!(
        "{} speakers, {} mixtures, {} dimensions\n",
        bank.models.len(),
        bank_cfg.mixtures,
        bank.feature_dim()
    );
    Ok(())
}

fn wav_inputs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |e| CliError::Io {
        path: input.to_path_buf(),
        source: e,
    };
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths = Vec::new();
    for entry in fs::read_dir(input).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    Ok(paths)
}

pub fn recognize(bank: &Path, input: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let bank = SpeakerBank::load(bank)?;
    let mut csv =
        String::from("segment,predicted,score,frames,second,second_score,third,third_score\n");
    let mut stdout = String::new();
    let mut predictions = Vec::new();
    for path in wav_inputs(input)? {
        let clip = wav::read_wav(&path)?;
        let r = out.timed("recognize", || recognize_clip(&clip, &bank))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let top = r.top(3);
        write!(csv, "{name},{},{:.6},{}", r.speaker, top[0].1, r.frames).unwrap();
        for i in 1..3 {
            match top.get(i) {
                Some((id, s)) => write!(csv, ",{id},{s:.6}").unwrap(),
                None => csv.push_str(",,"),
            }
        }
        csv.push('\n');
        writeln!(stdout, "{name}: {}", r.speaker).unwrap();
        predictions.push(json!({ "segment": name, "speaker": r.speaker }));
    }
    out.add("recognitions.csv", csv);
    out.summary = json!({ "segments": predictions.len(), "predictions": predictions });
    out.stdout = stdout;
    Ok(())
}

pub fn eval_speakers(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, out)?;
    let s = &cfg.speaker;
    let bank_cfg = cfg.bank_config(s.mixtures);
    out.seeds.insert("bank".into(), bank_cfg.seed);

    let mut pools = s.pool_sizes.clone();
    if pools.is_empty() {
        pools.push(corpus.len());
    }
    let mut sweeps: Vec<MixtureSweep> = Vec::new();
    let mut largest: Option<(usize, PreparedEnrollment, Vec<(String, AudioClip)>)> = None;
    for &n in &pools {
        let sub = corpus.take_speakers(n)?;
        let (enroll, tests) = split_corpus(&sub, s.train_utterances)?;
        let prep = out.timed("features", || PreparedEnrollment::new(&enroll, &bank_cfg))?;
        let sweep = out.timed("mixture sweep", || sweep_mixtures(&prep, &tests, &s.sweep))?;
        info!("pool {n}: best {:?}", sweep.best().map(|r| (r.mixtures, r.accuracy)));
        if largest.as_ref().is_none_or(|(m, _, _)| *m < n) {
            largest = Some((n, prep, tests));
        }
        sweeps.push(sweep);
    }

    let mut table = String::from("speakers");
    for k in &s.sweep {
        write!(table, ",{k}").unwrap();
    }
    table.push('\n');
    let mut detail = String::new();
    for sweep in &sweeps {
        write!(table, "{}", sweep.speakers).unwrap();
        for r in &sweep.rows {
            write!(table, ",{:.4}", r.accuracy).unwrap();
        }
        table.push('\n');
        let csv = sweep.to_csv();
        let body = if detail.is_empty() { &csv[..] } else { csv.split_once('\n').map_or("", |x| x.1) };
        detail.push_str(body);
    }
    out.add("mixture_sweep.csv", table.clone());
    out.add("mixture_sweep_detail.csv", detail);
    let mut stdout = table.replace(',', "\t");

    let mut meetings = serde_json::Value::Null;
    let (_, prep, tests) = largest.expect("at least one pool");
    let seats = s.meeting.speakers;
    if s.meeting_trials == 0 {
        info!("meeting evaluation disabled");
    } else if seats > tests.len() {
        let msg = format!("meeting evaluation skipped: {seats} seats but {} held-out speakers", tests.len());
        warn!("{msg}");
        out.warnings.push(msg);
    } else {
        let (bank, _) = out.timed("meeting bank", || prep.bank(s.mixtures))?;
        let mut pool = Enrollment::new();
        for (id, clip) in &tests {
            pool.entry(id.clone()).or_default().push(clip.clone());
        }
        let mut csv = String::from("trial,segments,occupants,counted,exact,skipped\n");
        let mut exact = 0;
        for t in 0..s.meeting_trials {
            let seed = out.seed(cfg, &format!("meeting/{t}"));
            let meeting = simulate_meeting(&pool, &s.meeting, seed)?;
            let count = out.timed("meetings", || {
                count_meeting_occupancy(&meeting.segments, &bank, s.min_frames)
            })?;
            let hit = count.count == meeting.occupants();
            exact += hit as usize;
            writeln!(
                csv,
                "{t},{},{},{},{hit},{}",
                meeting.segments.len(),
                meeting.occupants(),
                count.count,
                count.skipped.len()
            )
            .unwrap();
        }
        out.add("meetings.csv", csv);
        let rate = exact as f64 / s.meeting_trials as f64;
        writeln!(
            stdout,
            "meetings: {exact}/{} exact counts ({rate:.3}) with {} mixtures",
            s.meeting_trials, s.mixtures
        )
        .unwrap();
        meetings = json!({
            "trials": s.meeting_trials,
            "seats": seats,
            "mixtures": s.mixtures,
            "exact": exact,
            "exact_rate": rate,
        });
    }

    out.summary = json!({
        "pools": sweeps.iter().map(|sw| json!({
            "speakers": sw.speakers,
            "accuracy": sw.rows.iter().map(|r| json!({"mixtures": r.mixtures, "accuracy": r.accuracy})).collect::<Vec<_>>(),
            "best_mixtures": sw.best().map(|r| r.mixtures),
            "best_accuracy": sw.best().map(|r| r.accuracy),
            "em_monotone": sw.rows.iter().all(|r| r.em_monotone),
        })).collect::<Vec<_>>(),
        "meetings": meetings,
    });
    out.stdout = stdout;
    Ok(())
}
