//! Class weighting for the imbalanced seizure/background problem.
//!
//! Each class is weighted by the *other* class's share of the training set:
//! `w_bckg = n_seiz / n_total`, `w_seiz = n_bckg / n_total`.

use super::{DetectorError, Result};
use crate::Label;

/// Floor applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSetStats {
    pub n_total: usize,
    pub n_seiz: usize,
    pub n_bckg: usize,
}

impl TrainSetStats {
    pub fn new(n_seiz: usize, n_bckg: usize) -> Self {
        Self { n_total: n_seiz + n_bckg, n_seiz, n_bckg }
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Self {
        let (mut s, mut b) = (0, 0);
        for l in labels {
            match l {
                Label::Seiz => s += 1,
                Label::Bckg => b += 1,
            }
        }
        Self::new(s, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub w_bckg: f64,
    pub w_seiz: f64,
}

impl ClassWeights {
    pub const EQUAL: Self = Self { w_bckg: 0.5, w_seiz: 0.5 };

    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Bckg => self.w_bckg,
            Label::Seiz => self.w_seiz,
        }
    }
}

pub fn class_weights(stats: &TrainSetStats) -> Result<ClassWeights> {
    if stats.n_total == 0 {
        return Err(DetectorError::EmptyDataset);
    }
    if stats.n_total != stats.n_seiz + stats.n_bckg {
        return Err(DetectorError::InvalidConfig(format!(
            "n_total {} != n_seiz {} + n_bckg {}",
            stats.n_total, stats.n_seiz, stats.n_bckg
        )));
    }
    let n = stats.n_total as f64;
    Ok(ClassWeights { w_bckg: stats.n_seiz as f64 / n, w_seiz: stats.n_bckg as f64 / n })
}

/// How the two weighted terms combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossForm {
    /// `w[label] * -ln p[label]`, i.e. class-weighted cross-entropy.
    #[default]
    TrueClass,
    /// `w_bckg * -ln p_bckg + w_seiz * -ln p_seiz`, both terms for every
    /// sample regardless of its label. Label-independent; kept for study.
    TwoTerm,
}

/// Probability pair `[p_bckg, p_seiz]`.
pub type ProbPair = [f64; 2];

pub fn weighted_loss(p: ProbPair, label: Label, w: &ClassWeights) -> f64 {
    weighted_loss_with(p, label, w, LossForm::TrueClass)
}

pub fn weighted_loss_with(p: ProbPair, label: Label, w: &ClassWeights, form: LossForm) -> f64 {
    let nll = |q: f64| -q.max(PROB_FLOOR).ln();
    match form {
        LossForm::TrueClass => w.of(label) * nll(p[label.index()]),
        LossForm::TwoTerm => w.w_bckg * nll(p[0]) + w.w_seiz * nll(p[1]),
    }
}

/// Mean of [`weighted_loss_with`] over a batch.
pub fn batch_weighted_loss(probs: &[ProbPair], labels: &[Label], w: &ClassWeights, form: LossForm) -> f64 {
    assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs.iter().zip(labels).map(|(p, &l)| weighted_loss_with(*p, l, w, form)).sum();
    total / probs.len() as f64
}

/// Gradient of the mean batch loss with respect to the logits that produced
/// `probs` through a softmax.
pub fn loss_logit_grad(probs: &[ProbPair], labels: &[Label], w: &ClassWeights, form: LossForm) -> Vec<f64> {
    let inv_b = 1.0 / probs.len() as f64;
    let mut g = Vec::with_capacity(probs.len() * 2);
    for (p, &label) in probs.iter().zip(labels) {
        for j in 0..2 {
            let d = match form {
                LossForm::TrueClass => {
                    let target = if j == label.index() { 1.0 } else { 0.0 };
                    w.of(label) * (p[j] - target)
                }
                LossForm::TwoTerm => {
                    let wj = if j == 0 { w.w_bckg } else { w.w_seiz };
                    (w.w_bckg + w.w_seiz) * p[j] - wj
                }
            };
            g.push(d * inv_b);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_counts() {
        let w = class_weights(&TrainSetStats::new(30_000, 100_000)).unwrap();
        assert!((w.w_bckg - 30_000.0 / 130_000.0).abs() < 1e-15);
        assert!((w.w_bckg - 0.23077).abs() < 1e-5);
        assert!((w.w_seiz - 0.76923).abs() < 1e-5);
    }

    #[test]
    fn symmetric_and_degenerate() {
        assert_eq!(class_weights(&TrainSetStats::new(7, 7)).unwrap(), ClassWeights::EQUAL);
        let w = class_weights(&TrainSetStats::new(0, 5)).unwrap();
        assert_eq!((w.w_bckg, w.w_seiz), (0.0, 1.0));
        assert!(matches!(class_weights(&TrainSetStats::new(0, 0)), Err(DetectorError::EmptyDataset)));
        let bad = TrainSetStats { n_total: 3, n_seiz: 1, n_bckg: 1 };
        assert!(class_weights(&bad).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(weighted_loss([0.0, 1.0], Label::Seiz, &ClassWeights::EQUAL), 0.0);
        let w = ClassWeights { w_bckg: 0.25, w_seiz: 0.75 };
        let l = weighted_loss([0.5, 0.5], Label::Seiz, &w);
        assert!((l - 0.75 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 0.519860).abs() < 1e-6);
    }

    #[test]
    fn zero_probability_is_floored() {
        let l = weighted_loss([1.0, 0.0], Label::Seiz, &ClassWeights::EQUAL);
        assert!((l - 0.5 * -(PROB_FLOOR.ln())).abs() < 1e-9);
        assert!(l.is_finite());
    }

    #[test]
    fn two_term_ignores_label() {
        let w = ClassWeights { w_bckg: 0.3, w_seiz: 0.7 };
        let p = [0.2, 0.8];
        let a = weighted_loss_with(p, Label::Seiz, &w, LossForm::TwoTerm);
        let b = weighted_loss_with(p, Label::Bckg, &w, LossForm::TwoTerm);
        assert_eq!(a, b);
        assert!((a - (0.3 * -(0.2f64).ln() + 0.7 * -(0.8f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn logit_grad_matches_finite_difference() {
        let softmax = |z: [f64; 2]| {
            let m = z[0].max(z[1]);
            let e = [(z[0] - m).exp(), (z[1] - m).exp()];
            [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])]
        };
        let w = ClassWeights { w_bckg: 0.2, w_seiz: 0.8 };
        let logits = [[0.3, -1.2], [2.0, 0.5], [-0.7, 0.9]];
        let labels = [Label::Seiz, Label::Bckg, Label::Seiz];
        for form in [LossForm::TrueClass, LossForm::TwoTerm] {
            let probs: Vec<ProbPair> = logits.iter().map(|&z| softmax(z)).collect();
            let g = loss_logit_grad(&probs, &labels, &w, form);
            for i in 0..3 {
                for j in 0..2 {
                    let h = 1e-6;
                    let mut lp = logits;
                    lp[i][j] += h;
                    let mut lm = logits;
                    lm[i][j] -= h;
                    let fp: Vec<ProbPair> = lp.iter().map(|&z| softmax(z)).collect();
                    let fm: Vec<ProbPair> = lm.iter().map(|&z| softmax(z)).collect();
                    let fd = (batch_weighted_loss(&fp, &labels, &w, form) - batch_weighted_loss(&fm, &labels, &w, form)) / (2.0 * h);
                    assert!((fd - g[i * 2 + j]).abs() < 1e-7, "{form:?} {i} {j}: {fd} vs {}", g[i * 2 + j]);
                }
            }
        }
    }
}
