//! Training sets from a dataset directory, which holds either
//!
//! * recordings (`*.csv` or `*.eegr`) each with a `<stem>.ann` reference
//!   annotation, cut into windows labelled by seizure overlap, or
//! * `seiz/` and `bckg/` subdirectories of PGM window images.

use std::path::{Path, PathBuf};

use super::{load_montage, offline_scaled, offline_windows, PipelineConfig, PipelineError, Result};
use crate::detector::{
    build_mini_resnet, class_weights, subsample_background, train, ClassWeights, LabeledImage, MiniResNet,
    MiniResNetConfig, TrainConfig, TrainReport, TrainSetStats,
};
use crate::postproc::{read_annotation, sec_to_ms, EventList};
use crate::signal_io::{load_recording, RawRecording, RecordingFormat};
use crate::windowing::{resize_bicubic, to_grayscale, GrayscaleImage};
use crate::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of background windows kept by subsampling.
    pub bckg_fraction: f64,
    /// A window is labelled seizure when at least this share of its span
    /// overlaps reference seizures.
    pub label_overlap: f64,
    /// Window stride used to cut training windows (defaults to the
    /// inference stride).
    pub stride_samples: Option<usize>,
    pub augment: bool,
    pub network: MiniResNetConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 8,
            bckg_fraction: 0.2,
            label_overlap: 0.5,
            stride_samples: None,
            augment: true,
            network: MiniResNetConfig::default(),
        }
    }
}

/// Seizure iff the seizure time inside `[start, start + span)` is at least
/// `min_overlap * span`.
pub fn label_for_window(reference: &EventList, start_ms: u64, span_ms: u64, min_overlap: f64) -> Label {
    let stop = start_ms + span_ms;
    let seiz: u64 = reference
        .seizures()
        .map(|e| e.stop_ms.min(stop).saturating_sub(e.start_ms.max(start_ms)))
        .sum();
    if seiz as f64 >= min_overlap * span_ms as f64 {
        Label::Seiz
    } else {
        Label::Bckg
    }
}

/// Native-size grayscale windows of `rec` labelled against `reference`.
/// Window content lags the raw signal by the filter group delay, which is
/// removed before labelling.
pub fn labeled_windows(
    cfg: &PipelineConfig,
    rec: &RawRecording,
    reference: &EventList,
    stride_samples: usize,
    min_overlap: f64,
) -> Result<Vec<LabeledImage>> {
    let montage = load_montage(cfg)?;
    let (scaled, delay_sec) = offline_scaled(cfg, montage.as_ref(), rec)?;
    let span_ms = sec_to_ms(cfg.window_span_sec())?;
    offline_windows(cfg, &scaled, stride_samples)?
        .iter()
        .map(|w| {
            let start_ms = sec_to_ms((w.start_sec - delay_sec).max(0.0))?;
            let label = label_for_window(reference, start_ms, span_ms, min_overlap);
            Ok(LabeledImage { image: to_grayscale(w)?, label })
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.into(), source }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Reads a dataset directory into native-size labelled images.
pub fn load_dataset_dir(dir: &Path, cfg: &PipelineConfig, opts: &TrainOptions) -> Result<Vec<LabeledImage>> {
    let (seiz_dir, bckg_dir) = (dir.join("seiz"), dir.join("bckg"));
    if seiz_dir.is_dir() || bckg_dir.is_dir() {
        let mut out = Vec::new();
        for (sub, label) in [(bckg_dir, Label::Bckg), (seiz_dir, Label::Seiz)] {
            if !sub.is_dir() {
                continue;
            }
            for p in sorted_entries(&sub)?.into_iter().filter(|p| has_ext(p, "pgm")) {
                out.push(LabeledImage { image: GrayscaleImage::read_pgm(&p)?, label });
            }
        }
        return Ok(out);
    }
    let stride = opts.stride_samples.unwrap_or(cfg.stride_samples);
    let mut out = Vec::new();
    let mut found = false;
    for p in sorted_entries(dir)? {
        if !(has_ext(&p, "csv") || has_ext(&p, "eegr")) {
            continue;
        }
        found = true;
        let ann = p.with_extension("ann");
        if !ann.is_file() {
            return Err(PipelineError::Data(format!("{} has no reference annotation {}", p.display(), ann.display())));
        }
        let rec = load_recording(&p, RecordingFormat::from_path(&p))?;
        let reference = read_annotation(&ann)?;
        out.extend(labeled_windows(cfg, &rec, &reference, stride, opts.label_overlap)?);
    }
    if !found {
        return Err(PipelineError::Data(format!("{} holds no recordings and no seiz/ or bckg/ images", dir.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MiniResNet,
    pub report: TrainReport,
    pub weights: ClassWeights,
    /// Counts after background subsampling.
    pub stats: TrainSetStats,
}

/// Subsample background, weight classes from the remaining counts, resize
/// to the network input and train a freshly initialised network.
pub fn train_from_dataset(cfg: &PipelineConfig, opts: &TrainOptions, data: &[LabeledImage]) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(PipelineError::Detector(crate::detector::DetectorError::EmptyDataset));
    }
    let all = TrainSetStats::from_labels(data.iter().map(|d| &d.label));
    for (n, label) in [(all.n_seiz, Label::Bckg), (all.n_bckg, Label::Seiz)] {
        if n == 0 {
            return Err(PipelineError::Detector(crate::detector::DetectorError::SingleClass(label)));
        }
    }
    let kept = subsample_background(data, opts.bckg_fraction, cfg.seed)?;
    let stats = TrainSetStats::from_labels(kept.iter().map(|d| &d.label));
    let weights = class_weights(&stats)?;
    let size = cfg.image_size;
    let resized: Vec<LabeledImage> = kept
        .into_iter()
        .map(|d| {
            let image = if d.image.height() == size && d.image.width() == size {
                d.image
            } else {
                resize_bicubic(&d.image, size, size)?
            };
            Ok(LabeledImage { image, label: d.label })
        })
        .collect::<Result<_>>()?;
    let net = MiniResNetConfig { input_size: size, seed: cfg.seed, ..opts.network.clone() };
    let mut model = build_mini_resnet(&net)?;
    let tc = TrainConfig {
        epochs: opts.epochs,
        batch_size: opts.batch_size,
        augment: opts.augment,
        seed: cfg.seed,
        ..Default::default()
    };
    let report = train(&mut model, &resized, &weights, &tc)?;
    Ok(TrainOutcome { model, report, weights, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_labelling() {
        let r = EventList::from_seizures(&[(10_000, 20_000)], 60_000);
        assert_eq!(label_for_window(&r, 7_440, 5_120, 0.5), Label::Seiz);
        assert_eq!(label_for_window(&r, 7_439, 5_120, 0.5), Label::Bckg);
        assert_eq!(label_for_window(&r, 12_000, 5_120, 0.5), Label::Seiz);
        assert_eq!(label_for_window(&r, 17_440, 5_120, 0.5), Label::Seiz);
        assert_eq!(label_for_window(&r, 30_000, 5_120, 0.5), Label::Bckg);
    }
}
