//! SGD training with step-decayed learning rate, random resized crop and
//! horizontal flip augmentation, and class-weighted cross-entropy.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::weights::{batch_weighted_loss, loss_logit_grad, ClassWeights, LossForm};
use super::{softmax2, DetectorError, DetectorModel, MiniResNet, Result};
use crate::windowing::{resize_bicubic, GrayscaleImage};
use crate::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: GrayscaleImage,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// The learning rate is multiplied by `lr_decay` every `lr_step_epochs`.
    pub lr_step_epochs: usize,
    pub lr_decay: f64,
    pub augment: bool,
    /// Area fraction range for the random resized crop.
    pub crop_scale: (f64, f64),
    pub flip_prob: f64,
    pub loss_form: LossForm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_step_epochs: 10,
            lr_decay: 0.1,
            augment: true,
            crop_scale: (0.8, 1.0),
            flip_prob: 0.5,
            loss_form: LossForm::TrueClass,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DetectorError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be positive and momentum in [0, 1)");
        }
        let (lo, hi) = self.crop_scale;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return bad("crop scale must satisfy 0 < min <= max <= 1");
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad("flip probability must be in [0, 1]");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let steps = if self.lr_step_epochs == 0 { 0 } else { epoch / self.lr_step_epochs };
        self.learning_rate * self.lr_decay.powi(steps as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy of the training-mode predictions on the augmented batches.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

/// Random square crop covering `crop_scale` of the area, resized back to the
/// original size, then a random horizontal flip.
pub fn augment(img: &GrayscaleImage, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<GrayscaleImage> {
    let (h, w) = (img.height(), img.width());
    let scale = rng.random_range(cfg.crop_scale.0..=cfg.crop_scale.1);
    let ch = ((h as f64 * scale.sqrt()).round() as usize).clamp(2, h);
    let cw = ((w as f64 * scale.sqrt()).round() as usize).clamp(2, w);
    let y = rng.random_range(0..=h - ch);
    let x = rng.random_range(0..=w - cw);
    let mut out = if (ch, cw) == (h, w) { img.clone() } else { resize_bicubic(&img.crop(y, x, ch, cw)?, h, w)? };
    if rng.random_bool(cfg.flip_prob) {
        out = out.flip_horizontal();
    }
    Ok(out)
}

/// Trains `model` in place. Returns per-epoch loss and accuracy.
pub fn train(model: &mut MiniResNet, data: &[LabeledImage], w: &ClassWeights, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok(report);
    }
    if data.is_empty() {
        return Err(DetectorError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Vec<f64>> = Vec::new();
    model.for_each_param(&mut |p| velocity.push(vec![0.0; p.value.len()]));
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut images = Vec::with_capacity(batch.len());
            for &i in batch {
                let img = &data[i].image;
                images.push(if cfg.augment { augment(img, cfg, &mut rng)? } else { img.clone() });
            }
            let labels: Vec<Label> = batch.iter().map(|&i| data[i].label).collect();
            let refs: Vec<&GrayscaleImage> = images.iter().collect();
            let x = model.images_to_tensor(&refs)?;

            let logits = model.forward_train(x);
            let probs: Vec<[f64; 2]> = logits.chunks_exact(2).map(softmax2).collect();
            let loss = batch_weighted_loss(&probs, &labels, w, cfg.loss_form);
            if !loss.is_finite() {
                return Err(DetectorError::Diverged { epoch, batch: batch_idx, loss });
            }
            loss_sum += loss * batch.len() as f64;
            correct += probs.iter().zip(&labels).filter(|(p, &l)| predicted(p) == l).count();

            model.zero_grad();
            model.backward(&loss_logit_grad(&probs, &labels, w, cfg.loss_form));
            let mut k = 0;
            let mut diverged = false;
            model.for_each_param(&mut |p| {
                let v = &mut velocity[k];
                for ((value, g), vel) in p.value.iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                    *vel = cfg.momentum * *vel + g;
                    *value -= lr * *vel;
                    diverged |= !value.is_finite();
                }
                k += 1;
            });
            if diverged {
                return Err(DetectorError::Diverged { epoch, batch: batch_idx, loss: f64::NAN });
            }
        }
        let n = data.len() as f64;
        report.epochs.push(EpochStats { epoch: epoch + 1, mean_loss: loss_sum / n, accuracy: correct as f64 / n });
    }
    model.round_to_f32();
    Ok(report)
}

fn predicted(p: &[f64; 2]) -> Label {
    if p[1] > p[0] {
        Label::Seiz
    } else {
        Label::Bckg
    }
}

/// Confusion counts with seizure as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl EvalCounts {
    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.fn_ + self.tn;
        if n == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / n as f64
    }

    /// Fraction of samples of class `label` classified as such.
    pub fn recall(&self, label: Label) -> f64 {
        let (hit, total) = match label {
            Label::Seiz => (self.tp, self.tp + self.fn_),
            Label::Bckg => (self.tn, self.tn + self.fp),
        };
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

/// Inference-mode predictions (argmax) against the labels.
pub fn evaluate(model: &dyn DetectorModel, data: &[LabeledImage]) -> Result<EvalCounts> {
    let mut c = EvalCounts::default();
    for chunk in data.chunks(16) {
        let refs: Vec<&GrayscaleImage> = chunk.iter().map(|d| &d.image).collect();
        for (p, d) in model.predict_batch(&refs)?.iter().zip(chunk) {
            match (d.label, predicted(p)) {
                (Label::Seiz, Label::Seiz) => c.tp += 1,
                (Label::Seiz, Label::Bckg) => c.fn_ += 1,
                (Label::Bckg, Label::Seiz) => c.fp += 1,
                (Label::Bckg, Label::Bckg) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

pub fn evaluate_accuracy(model: &dyn DetectorModel, data: &[LabeledImage]) -> Result<f64> {
    Ok(evaluate(model, data)?.accuracy())
}

/// Keeps every seizure sample and `round(fraction * n_bckg)` background
/// samples drawn uniformly without replacement. Original order is preserved.
pub fn subsample_background(data: &[LabeledImage], fraction: f64, seed: u64) -> Result<Vec<LabeledImage>> {
    if data.is_empty() {
        return Err(DetectorError::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DetectorError::InvalidConfig(format!("background fraction {fraction} outside (0, 1]")));
    }
    let bckg: Vec<usize> = (0..data.len()).filter(|&i| data[i].label == Label::Bckg).collect();
    let keep_n = (fraction * bckg.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; data.len()];
    for j in rand::seq::index::sample(&mut rng, bckg.len(), keep_n) {
        keep[bckg[j]] = true;
    }
    Ok(data.iter().zip(keep).filter(|(d, k)| *k || d.label == Label::Seiz).map(|(d, _)| d.clone()).collect())
}

/// CSV with header `epoch,mean_loss,accuracy`.
pub fn write_training_log(report: &TrainReport, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,mean_loss,accuracy\n");
    for e in &report.epochs {
        out.push_str(&format!("{},{:.6},{:.6}\n", e.epoch, e.mean_loss, e.accuracy));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|source| DetectorError::Io { path: path.into(), source })
}
