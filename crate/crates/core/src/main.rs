use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ictal::detector::{save_model, write_training_log};
use ictal::pipeline::{
    load_dataset_dir, load_detector, run_bench, run_offline, run_streaming, train_from_dataset, PipelineConfig,
    PipelineError, Result, TrainOptions,
};
use ictal::postproc::{read_annotation, write_annotation};
use ictal::scoring::{confusion_csv, confusion_matrix, report_csv, score_epoch, score_ovlp, sweep_csv, sweep_delay};
use ictal::signal_io::{load_recording, write_binary, write_csv, RecordingFormat};
use ictal::synth::{generate, SynthConfig};

/// Causal seizure detection for multichannel scalp EEG.
#[derive(Parser, Debug)]
#[command(name = "ictal", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect seizures in a recording and write a hypothesis annotation.
    Run(RunArgs),
    /// Train the reference detector on a dataset directory.
    Train(TrainArgs),
    /// Score a hypothesis annotation against a reference.
    Score(ScoreArgs),
    /// Sweep postprocessing durations and report sensitivity against false alarms.
    Sweep(SweepArgs),
    /// Replay a recording through the streaming pipeline and time it.
    Bench(BenchArgs),
    /// Generate a synthetic recording with injected seizures.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set s_th=0.6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set model_path=...`.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| PipelineError::Config { line: 0, msg: format!("--set expects KEY=VALUE, got '{kv}'") })?;
            cfg.set(k.trim(), v.trim()).map_err(|msg| PipelineError::Config { line: 0, msg })?;
        }
        if let Some(m) = &self.model {
            cfg.model_path = Some(m.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Recording (`.csv` or binary `.eegr`).
    recording: PathBuf,
    /// Hypothesis annotation to write.
    #[arg(short, long)]
    out: PathBuf,
    /// Also write per-window posteriors as `start_sec,p_seiz` CSV.
    #[arg(long)]
    posteriors: Option<PathBuf>,
    /// Process the whole recording at once instead of replaying it.
    #[arg(long)]
    offline: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Recordings with `<stem>.ann` references, or `seiz/` and `bckg/` PGM images.
    dataset: PathBuf,
    /// Model file to write.
    #[arg(short, long)]
    out: PathBuf,
    /// Per-epoch CSV log (defaults to `<out>.log.csv`).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Share of background windows kept.
    #[arg(long, default_value_t = 0.2)]
    bckg_fraction: f64,
    /// Minimum seizure share of a window for a seizure label.
    #[arg(long, default_value_t = 0.5)]
    label_overlap: f64,
    /// Stride, in decimated samples, used to cut training windows.
    #[arg(long)]
    train_stride: Option<usize>,
    /// Disable crop and flip augmentation.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    reference: PathBuf,
    hypothesis: PathBuf,
    /// Epoch length for the epoch metric.
    #[arg(long, default_value_t = 0.25)]
    epoch_sec: f64,
    /// Report CSV (stdout when absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write the row-normalised epoch confusion matrix.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    recording: PathBuf,
    /// Reference annotation for the recording.
    #[arg(long)]
    reference: PathBuf,
    /// Comma-separated `bd:sd` pairs in seconds.
    #[arg(long, default_value = "0:0,1:1,2:2,3:3,4:4,5:5,7.5:7.5,10:10")]
    grid: String,
    /// Sweep CSV (stdout when absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    recording: PathBuf,
    /// Leave CPU affinity alone.
    #[arg(long)]
    no_pin: bool,
    /// Report file (stdout when absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Recording to write; `.csv` selects text, anything else binary.
    #[arg(short, long)]
    out: PathBuf,
    /// Reference annotation (defaults to `<out>` with extension `.ann`).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 600.0)]
    duration_sec: f64,
    #[arg(long, default_value_t = 4)]
    seizures: usize,
    /// Shortest and longest seizure, in seconds.
    #[arg(long, value_name = "LO,HI", default_value = "15,40", value_parser = parse_range)]
    seizure_sec: (f64, f64),
    /// Seizure-free time at both ends.
    #[arg(long, default_value_t = 10.0)]
    margin_sec: f64,
    #[arg(long, default_value_t = 250.0)]
    rate_hz: f64,
    /// Extra electrode names beyond the standard 19, comma-separated.
    #[arg(long, value_delimiter = ',')]
    extra: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| PipelineError::Io { path: p.into(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_rec(path: &Path) -> Result<ictal::signal_io::RawRecording> {
    Ok(load_recording(path, RecordingFormat::from_path(path))?)
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let model = load_detector(&cfg)?;
    let rec = read_rec(&a.recording)?;
    let out = if a.offline { run_offline(&cfg, &model, &rec)? } else { run_streaming(&cfg, &model, &rec)? };
    write_annotation(&out.events, &a.out)?;
    if let Some(p) = &a.posteriors {
        let mut text = String::from("start_sec,p_seiz\n");
        for (t, p) in out.posteriors.entries() {
            text.push_str(&format!("{t:.3},{p:.6}\n"));
        }
        write_out(Some(p), &text)?;
    }
    eprintln!("{} windows, {} seizure events", out.posteriors.len(), out.events.seizures().count());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch_size,
        bckg_fraction: a.bckg_fraction,
        label_overlap: a.label_overlap,
        stride_samples: a.train_stride,
        augment: !a.no_augment,
        ..Default::default()
    };
    let data = load_dataset_dir(&a.dataset, &cfg, &opts)?;
    let outcome = train_from_dataset(&cfg, &opts, &data)?;
    eprintln!(
        "{} seizure / {} background windows after subsampling; class weights bckg={:.6} seiz={:.6}",
        outcome.stats.n_seiz, outcome.stats.n_bckg, outcome.weights.w_bckg, outcome.weights.w_seiz
    );
    if let Some(last) = outcome.report.epochs.last() {
        eprintln!("epoch {}: loss {:.6}, accuracy {:.4}", last.epoch, last.mean_loss, last.accuracy);
    }
    save_model(&outcome.model, &a.out)?;
    let log = a.log.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".log.csv");
        s.into()
    });
    write_training_log(&outcome.report, &log)?;
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    a.common.load()?;
    let r = read_annotation(&a.reference)?;
    let h = read_annotation(&a.hypothesis)?;
    let reports = [score_ovlp(&r, &h)?, score_epoch(&r, &h, a.epoch_sec)?];
    write_out(a.out.as_deref(), &report_csv(&reports))?;
    if let Some(p) = &a.confusion {
        write_out(Some(p), &confusion_csv(&confusion_matrix(&r, &h, a.epoch_sec)?))?;
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let bad = || PipelineError::Config { line: 0, msg: format!("grid entry '{p}' is not bd:sd") };
            let (bd, sd) = p.split_once(':').ok_or_else(bad)?;
            Ok((bd.trim().parse().map_err(|_| bad())?, sd.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let grid = parse_grid(&a.grid)?;
    let model = load_detector(&cfg)?;
    let rec = read_rec(&a.recording)?;
    let reference = read_annotation(&a.reference)?;
    let out = run_offline(&cfg, &model, &rec)?;
    let rows = sweep_delay(&out.posteriors, &reference, cfg.s_th, &grid)?;
    write_out(a.out.as_deref(), &sweep_csv(&rows))
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let model = load_detector(&cfg)?;
    let rec = read_rec(&a.recording)?;
    let report = run_bench(&cfg, &model, &rec, !a.no_pin)?;
    write_out(a.out.as_deref(), &report.to_text())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    a.common.load()?;
    let s = generate(&SynthConfig {
        duration_sec: a.duration_sec,
        n_seizures: a.seizures,
        seizure_sec: a.seizure_sec,
        margin_sec: a.margin_sec,
        sample_rate_hz: a.rate_hz,
        extra_channels: a.extra.clone(),
        seed: a.seed,
        ..Default::default()
    })?;
    match RecordingFormat::from_path(&a.out) {
        RecordingFormat::Csv => write_csv(&s.recording, &a.out)?,
        RecordingFormat::RawBinary => write_binary(&s.recording, &a.out)?,
    }
    let ann = a.reference.clone().unwrap_or_else(|| a.out.with_extension("ann"));
    write_annotation(&s.reference, &ann)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
