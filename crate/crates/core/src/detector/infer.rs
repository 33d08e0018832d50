use super::{DetectorError, DetectorModel, Result};
use crate::windowing::GrayscaleImage;

/// Tolerance on the spacing between consecutive window starts.
const STRIDE_TOL_SEC: f64 = 1e-6;

/// Per-window seizure posteriors at a uniform stride. Entry `i` is taken to
/// describe the interval `[start_i, start_i + stride)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSequence {
    entries: Vec<(f64, f64)>,
    stride_sec: f64,
}

impl PosteriorSequence {
    pub fn new(stride_sec: f64) -> Result<Self> {
        if !(stride_sec > 0.0 && stride_sec.is_finite()) {
            return Err(DetectorError::InvalidConfig(format!("stride {stride_sec} s must be positive")));
        }
        Ok(Self { entries: Vec::new(), stride_sec })
    }

    /// Posteriors for windows starting at `0, stride, 2*stride, ...`.
    pub fn from_probs(stride_sec: f64, p_seiz: &[f64]) -> Result<Self> {
        let mut seq = Self::new(stride_sec)?;
        for (i, &p) in p_seiz.iter().enumerate() {
            seq.push(i as f64 * stride_sec, p)?;
        }
        Ok(seq)
    }

    pub fn push(&mut self, start_sec: f64, p_seiz: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p_seiz) {
            return Err(DetectorError::InvalidConfig(format!("posterior {p_seiz} outside [0, 1]")));
        }
        if let Some(&(prev, _)) = self.entries.last() {
            if (start_sec - prev - self.stride_sec).abs() > STRIDE_TOL_SEC {
                return Err(DetectorError::OutOfOrder { start_sec, prev_sec: prev, stride_sec: self.stride_sec });
            }
        }
        self.entries.push((start_sec, p_seiz));
        Ok(())
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn p_seiz(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn stride_sec(&self) -> f64 {
        self.stride_sec
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Time covered by the sequence, measured from 0.
    pub fn end_sec(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.0 + self.stride_sec)
    }
}

/// Classifies `windows` (ordered by `start_sec`) in batches of `batch_size`.
pub fn infer_stream(
    model: &dyn DetectorModel,
    windows: &[GrayscaleImage],
    stride_sec: f64,
    batch_size: usize,
) -> Result<PosteriorSequence> {
    let mut seq = PosteriorSequence::new(stride_sec)?;
    for chunk in windows.chunks(batch_size.max(1)) {
        let refs: Vec<&GrayscaleImage> = chunk.iter().collect();
        for (img, p) in chunk.iter().zip(model.predict_batch(&refs)?) {
            seq.push(img.start_sec, p[1])?;
        }
    }
    Ok(seq)
}
