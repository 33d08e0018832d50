//! Per-window classification: the [`DetectorModel`] interface, a reference
//! residual network, class-weighted loss and the training loop.

mod format;
mod infer;
pub mod layers;
mod resnet;
mod train;
mod weights;

pub use format::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use infer::{infer_stream, PosteriorSequence};
pub use resnet::{build_mini_resnet, softmax2, BasicBlock, MiniResNet, MiniResNetConfig, StateRef};
pub use train::{
    augment, evaluate, evaluate_accuracy, subsample_background, train, write_training_log, EpochStats, EvalCounts,
    LabeledImage, TrainConfig, TrainReport,
};
pub use weights::{
    batch_weighted_loss, class_weights, loss_logit_grad, weighted_loss, weighted_loss_with, ClassWeights, LossForm,
    ProbPair, TrainSetStats, PROB_FLOOR,
};

use std::path::PathBuf;

use crate::windowing::{GrayscaleImage, WindowingError};

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains only {0} samples; both classes are required")]
    SingleClass(crate::Label),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("expected {expected}x{expected} input, got {height}x{width}")]
    InputShape { expected: usize, height: usize, width: usize },
    #[error("window at {start_sec} s is out of order (previous {prev_sec} s, stride {stride_sec} s)")]
    OutOfOrder { start_sec: f64, prev_sec: f64, stride_sec: f64 },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Windowing(#[from] WindowingError),
}

pub type Result<T, E = DetectorError> = std::result::Result<T, E>;

/// Anything that maps a square grayscale window to `[p_bckg, p_seiz]`.
pub trait DetectorModel {
    /// Side length of the square images the model accepts.
    fn input_size(&self) -> usize;

    fn predict_batch(&self, images: &[&GrayscaleImage]) -> Result<Vec<ProbPair>>;

    fn predict(&self, image: &GrayscaleImage) -> Result<ProbPair> {
        Ok(self.predict_batch(&[image])?[0])
    }
}

impl<T: DetectorModel + ?Sized> DetectorModel for &T {
    fn input_size(&self) -> usize {
        (**self).input_size()
    }

    fn predict_batch(&self, images: &[&GrayscaleImage]) -> Result<Vec<ProbPair>> {
        (**self).predict_batch(images)
    }
}

impl<T: DetectorModel + ?Sized> DetectorModel for std::sync::Arc<T> {
    fn input_size(&self) -> usize {
        (**self).input_size()
    }

    fn predict_batch(&self, images: &[&GrayscaleImage]) -> Result<Vec<ProbPair>> {
        (**self).predict_batch(images)
    }
}
