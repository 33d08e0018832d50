//! End-to-end wiring: configuration, the signal-to-image front end,
//! detection runs, training-set construction and benchmarking.

mod bench;
mod config;
mod dataset;
mod frontend;
mod stream;

pub use bench::{peak_memory_bytes, pin_to_single_core, run_bench, BenchReport, LatencyBreakdown, StageTimings};
pub use config::{MontageChoice, PipelineConfig, CONFIG_KEYS};
pub use dataset::{
    label_for_window, labeled_windows, load_dataset_dir, train_from_dataset, TrainOptions, TrainOutcome,
};
pub use frontend::{offline_images, offline_scaled, offline_windows, FrontEnd, FrontEndTimings};
pub use stream::{StreamTimings, StreamingPipeline};

use std::path::PathBuf;

use crate::detector::{infer_stream, load_model, DetectorError, DetectorModel, MiniResNet, PosteriorSequence};
use crate::postproc::{postprocess, EventList, PostprocError};
use crate::scoring::ScoreError;
use crate::signal_io::{MontageSpec, RawRecording, SignalError};
use crate::synth::SynthError;
use crate::windowing::WindowingError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// `line` is 0 when the problem is not tied to a config file line.
    #[error("config{}: {msg}", if *.line > 0 { format!(" line {line}") } else { String::new() })]
    Config { line: usize, msg: String },
    #[error("data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("signal_io: {0}")]
    Signal(#[from] SignalError),
    #[error("windowing: {0}")]
    Windowing(#[from] WindowingError),
    #[error("detector: {0}")]
    Detector(#[from] DetectorError),
    #[error("postproc: {0}")]
    Postproc(#[from] PostprocError),
    #[error("scoring: {0}")]
    Scoring(#[from] ScoreError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
}

impl PipelineError {
    /// 1 usage/configuration, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 1,
            PipelineError::Detector(DetectorError::InvalidConfig(_)) => 1,
            PipelineError::Postproc(PostprocError::InvalidParam(_)) => 1,
            PipelineError::Scoring(ScoreError::InvalidParam(_)) => 1,
            PipelineError::Windowing(WindowingError::InvalidParam(_)) => 1,
            PipelineError::Synth(SynthError::Config(_)) => 1,
            PipelineError::Detector(DetectorError::Diverged { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// The montage named by the configuration (`None` keeps input channels).
pub fn load_montage(cfg: &PipelineConfig) -> Result<Option<MontageSpec>> {
    Ok(match &cfg.montage {
        MontageChoice::BuiltIn => Some(MontageSpec::default_tcp()),
        MontageChoice::Identity => None,
        MontageChoice::File(p) => Some(MontageSpec::from_file(p)?),
    })
}

/// Loads `cfg.model_path` and checks it against `cfg.image_size`.
pub fn load_detector(cfg: &PipelineConfig) -> Result<MiniResNet> {
    let path = cfg.model_path.as_ref().ok_or_else(|| PipelineError::Config { line: 0, msg: "model_path is not set".into() })?;
    let model = load_model(path)?;
    check_model(cfg, &model)?;
    Ok(model)
}

pub(crate) fn check_model(cfg: &PipelineConfig, model: &dyn DetectorModel) -> Result<()> {
    if model.input_size() != cfg.image_size {
        return Err(PipelineError::Config {
            line: 0,
            msg: format!("model expects {0}x{0} images but image_size is {1}", model.input_size(), cfg.image_size),
        });
    }
    Ok(())
}

/// Result of a detection run over one recording.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub posteriors: PosteriorSequence,
    /// Hypothesis covering the whole recording.
    pub events: EventList,
    /// Largest postprocessing decision lag (streaming runs only).
    pub max_lag_sec: f64,
}

fn total_ms(rec: &RawRecording) -> u64 {
    (rec.sample_count() as f64 / rec.sample_rate_hz() * 1000.0).round() as u64
}

/// Batch run: load everything, then process stage by stage.
pub fn run_offline(cfg: &PipelineConfig, model: &dyn DetectorModel, rec: &RawRecording) -> Result<RunOutput> {
    check_model(cfg, model)?;
    let montage = load_montage(cfg)?;
    let images = offline_images(cfg, montage.as_ref(), rec)?;
    let posteriors = infer_stream(model, &images, cfg.stride_sec(), 8)?;
    let events = postprocess(&posteriors, &cfg.postproc_params()?)?.extend_to(total_ms(rec))?;
    Ok(RunOutput { posteriors, events, max_lag_sec: 0.0 })
}

/// Replays `rec` frame by frame through the causal pipeline.
pub fn run_streaming(cfg: &PipelineConfig, model: &dyn DetectorModel, rec: &RawRecording) -> Result<RunOutput> {
    let names: Vec<String> = rec.channels().iter().map(|c| c.name.clone()).collect();
    let mut sp = StreamingPipeline::new(cfg, model, &names, rec.sample_rate_hz())?;
    let chans = rec.channels();
    let mut frame = vec![0.0; chans.len()];
    for i in 0..rec.sample_count() {
        for (f, c) in frame.iter_mut().zip(chans) {
            *f = c.samples[i];
        }
        sp.push_frame(&frame)?;
    }
    sp.finish()?;
    sp.output()
}
