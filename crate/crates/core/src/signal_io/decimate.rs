//! Integer-factor decimation behind a causal linear-phase FIR low-pass.
//!
//! The anti-aliasing filter is a Kaiser-windowed sinc. Its passband edge sits
//! at 80% of the output Nyquist frequency and its stopband starts at the
//! output Nyquist frequency, with 50 dB of stopband attenuation. For the
//! 250 Hz -> 50 Hz case that is a 20 Hz passband, a 25 Hz stopband edge and
//! 147 taps (73 samples, 0.292 s, of group delay).

use std::f64::consts::PI;
use std::sync::Arc;

use super::{Channel, MontagedRecording, Result, SignalError};

const STOPBAND_ATTENUATION_DB: f64 = 50.0;
const PASSBAND_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    factor: usize,
    source_hz: f64,
}

impl FirFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn group_delay_samples(&self) -> f64 {
        (self.taps.len() - 1) as f64 / 2.0
    }

    pub fn group_delay_sec(&self) -> f64 {
        self.group_delay_samples() / self.source_hz
    }
}

fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

fn decimation_factor(source_hz: f64, target_hz: f64) -> Result<usize> {
    let fail = |msg: &str| SignalError::Decimation { from_hz: source_hz, to_hz: target_hz, msg: msg.into() };
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(fail("target rate must be positive"));
    }
    if target_hz > source_hz {
        return Err(fail("target rate is above the source rate"));
    }
    let ratio = source_hz / target_hz;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 * ratio {
        return Err(fail("source rate is not an integer multiple of the target rate"));
    }
    Ok(factor as usize)
}

/// Designs the anti-aliasing filter for `source_hz -> target_hz`.
pub fn design_antialias_fir(source_hz: f64, target_hz: f64) -> Result<FirFilter> {
    let factor = decimation_factor(source_hz, target_hz)?;
    if factor == 1 {
        return Ok(FirFilter { taps: vec![1.0], factor, source_hz });
    }
    let stop = target_hz / 2.0;
    let pass = PASSBAND_FRACTION * stop;
    let cutoff = (pass + stop) / 2.0 / source_hz;
    let transition = 2.0 * PI * (stop - pass) / source_hz;
    let mut len = ((STOPBAND_ATTENUATION_DB - 7.95) / (2.285 * transition)).ceil() as usize + 1;
    if len % 2 == 0 {
        len += 1;
    }
    let mid = (len - 1) as f64 / 2.0;
    let beta = kaiser_beta(STOPBAND_ATTENUATION_DB);
    let norm = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let x = n as f64 - mid;
            let sinc = if x == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * x).sin() / (PI * x) };
            let r = x / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(FirFilter { taps, factor, source_hz })
}

#[derive(Debug, Clone)]
pub struct Decimated {
    pub recording: MontagedRecording,
    /// Delay the filter adds to signal content, in seconds.
    pub group_delay_sec: f64,
}

/// Offline decimation. Output sample `m` is the filtered input at index
/// `m * factor`, so the output has `ceil(n / factor)` samples.
pub fn decimate(rec: &MontagedRecording, target_hz: f64) -> Result<Decimated> {
    let filter = design_antialias_fir(rec.sample_rate_hz(), target_hz)?;
    let taps = filter.taps();
    let factor = filter.factor();
    let channels = rec
        .channels()
        .iter()
        .map(|ch| {
            let x = &ch.samples;
            let out = (0..x.len())
                .step_by(factor)
                .map(|i| {
                    let mut acc = 0.0;
                    for (k, h) in taps.iter().enumerate().take(i + 1) {
                        acc += h * x[i - k];
                    }
                    acc
                })
                .collect();
            Channel::new(ch.name.clone(), out)
        })
        .collect();
    Ok(Decimated {
        recording: MontagedRecording::new(channels, target_hz)?,
        group_delay_sec: filter.group_delay_sec(),
    })
}

/// Sample-at-a-time form of [`decimate`] for one channel; produces
/// bit-identical output.
#[derive(Debug, Clone)]
pub struct FirDecimator {
    filter: Arc<FirFilter>,
    // Each sample is written twice, `len` apart, so the newest `len` samples
    // are always one contiguous slice.
    history: Vec<f64>,
    pos: usize,
    seen: usize,
}

impl FirDecimator {
    pub fn new(filter: Arc<FirFilter>) -> Self {
        let len = filter.taps.len();
        Self { filter, history: vec![0.0; 2 * len], pos: 0, seen: 0 }
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        let len = self.filter.taps.len();
        self.history[self.pos] = x;
        self.history[self.pos + len] = x;
        let i = self.seen;
        self.seen += 1;
        let window = &self.history[self.pos + 1..self.pos + 1 + len];
        self.pos = (self.pos + 1) % len;
        if i % self.filter.factor != 0 {
            return None;
        }
        let mut acc = 0.0;
        for (k, h) in self.filter.taps.iter().enumerate().take(i + 1) {
            acc += h * window[len - 1 - k];
        }
        Some(acc)
    }
}
