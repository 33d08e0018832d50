//! Max local scaling: every sample is divided by the largest magnitude in a
//! centred window of `round(window_sec * rate)` samples. Near the ends of the
//! signal the window is clamped to the available samples.

use std::collections::VecDeque;

use super::{Result, WindowingError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub window_sec: f64,
    /// Floor on the divisor; silent stretches scale to zero.
    pub epsilon: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { window_sec: 6.0, epsilon: 1e-9 }
    }
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_sec > 0.0 && self.window_sec.is_finite()) {
            return Err(WindowingError::InvalidParam(format!("window_sec must be positive, got {}", self.window_sec)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(WindowingError::InvalidParam(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Samples on each side of the centre sample.
    pub fn half_width(&self, rate_hz: f64) -> usize {
        (self.window_sec * rate_hz).round() as usize / 2
    }
}

pub fn max_local_scale(signal: &[f64], rate_hz: f64, params: &ScalingParams) -> Vec<f64> {
    let mut scaler = StreamingScaler::new(params.half_width(rate_hz), params.epsilon);
    let mut out = Vec::with_capacity(signal.len());
    for &x in signal {
        out.extend(scaler.push(x));
    }
    out.extend(scaler.finish());
    out
}

/// Incremental max local scaling. Output for sample `n` is released once
/// sample `n + half_width` has arrived, or at [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct StreamingScaler {
    half: usize,
    epsilon: f64,
    pending: VecDeque<f64>,
    // (index, |x|) with strictly decreasing magnitudes
    maxima: VecDeque<(usize, f64)>,
    received: usize,
    emitted: usize,
}

impl StreamingScaler {
    pub fn new(half_width: usize, epsilon: f64) -> Self {
        Self {
            half: half_width,
            epsilon,
            pending: VecDeque::new(),
            maxima: VecDeque::new(),
            received: 0,
            emitted: 0,
        }
    }

    /// Samples of look-ahead the scaler needs.
    pub fn lookahead(&self) -> usize {
        self.half
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        let mag = x.abs();
        while self.maxima.back().is_some_and(|&(_, m)| m <= mag) {
            self.maxima.pop_back();
        }
        self.maxima.push_back((self.received, mag));
        self.pending.push_back(x);
        self.received += 1;
        if self.received > self.emitted + self.half {
            Some(self.emit_next())
        } else {
            None
        }
    }

    pub fn finish(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pending.len());
        while !self.pending.is_empty() {
            out.push(self.emit_next());
        }
        out
    }

    fn emit_next(&mut self) -> f64 {
        let n = self.emitted;
        let lo = n.saturating_sub(self.half);
        while self.maxima.front().is_some_and(|&(i, _)| i < lo) {
            self.maxima.pop_front();
        }
        let local_max = self.maxima.front().map_or(0.0, |&(_, m)| m);
        let x = self.pending.pop_front().expect("pending sample");
        self.emitted += 1;
        x / local_max.max(self.epsilon)
    }
}
