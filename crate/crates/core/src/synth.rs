//! Seeded synthetic EEG for tests, demos and benchmarks.
//!
//! Background is 1/f ("pink") noise per electrode plus a common-mode
//! component that the bipolar montage cancels. Seizures are 3 Hz bursts,
//! amplitude modulated, with per-electrode gain, phase and onset jitter, and
//! raised-cosine onset/offset ramps.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::postproc::EventList;
use crate::signal_io::{Channel, RawRecording, SignalError};

/// 10-20 scalp electrodes referenced by the default montage.
pub const ELECTRODES: [&str; 19] =
    ["Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz", "P4", "T6", "O1", "O2"];

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub duration_sec: f64,
    pub sample_rate_hz: f64,
    pub n_seizures: usize,
    /// Seizure duration range in seconds.
    pub seizure_sec: (f64, f64),
    pub burst_hz: f64,
    /// Standard deviation of the per-electrode background, in microvolts.
    pub background_uv: f64,
    /// Peak burst amplitude, in microvolts.
    pub seizure_uv: f64,
    pub onset_jitter_sec: f64,
    /// Background-only time kept at both ends of the recording.
    pub margin_sec: f64,
    /// Electrodes beyond the standard 19 (e.g. `A1`), filled with background.
    pub extra_channels: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration_sec: 600.0,
            sample_rate_hz: 250.0,
            n_seizures: 4,
            seizure_sec: (15.0, 40.0),
            burst_hz: 3.0,
            background_uv: 20.0,
            seizure_uv: 150.0,
            onset_jitter_sec: 0.5,
            margin_sec: 10.0,
            extra_channels: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: RawRecording,
    /// Seizure intervals as injected (before per-channel jitter).
    pub reference: EventList,
}

/// Paul Kellet's refined pink-noise filter driven by white noise.
struct Pink {
    b: [f64; 7],
}

impl Pink {
    fn next(&mut self, white: f64) -> f64 {
        let b = &mut self.b;
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        out
    }
}

fn pink_noise(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let mut p = Pink { b: [0.0; 7] };
    // let the slow poles settle
    for _ in 0..2000 {
        p.next(white.sample(rng));
    }
    let mut x: Vec<f64> = (0..n).map(|_| p.next(white.sample(rng))).collect();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let k = if sd > 0.0 { std / sd } else { 0.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) * k);
    x
}

/// Places `n` seizures in equal slots of the usable span, each at a random
/// offset within its slot, separated by at least the slot slack.
fn place_seizures(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, f64)>, SynthError> {
    if cfg.n_seizures == 0 {
        return Ok(Vec::new());
    }
    let usable = cfg.duration_sec - 2.0 * cfg.margin_sec;
    let slot = usable / cfg.n_seizures as f64;
    let (lo, hi) = cfg.seizure_sec;
    if !(lo > 0.0 && lo <= hi) || slot < hi + 2.0 * cfg.onset_jitter_sec + 5.0 {
        return Err(SynthError::Config(format!(
            "{} seizures of up to {hi} s do not fit in the {usable} s between the margins",
            cfg.n_seizures
        )));
    }
    Ok((0..cfg.n_seizures)
        .map(|k| {
            let dur = rng.random_range(lo..=hi);
            let slack = slot - dur - 2.0 * cfg.onset_jitter_sec;
            let start = cfg.margin_sec + k as f64 * slot + cfg.onset_jitter_sec + rng.random_range(0.0..slack);
            // whole milliseconds so reference annotations are exact
            ((start * 1000.0).round() / 1000.0, ((start + dur) * 1000.0).round() / 1000.0)
        })
        .collect())
}

fn raised_cosine(t: f64, dur: f64, ramp: f64) -> f64 {
    if t < 0.0 || t >= dur {
        0.0
    } else if t < ramp {
        0.5 - 0.5 * (PI * t / ramp).cos()
    } else if t > dur - ramp {
        0.5 - 0.5 * (PI * (dur - t) / ramp).cos()
    } else {
        1.0
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthRecording, SynthError> {
    if !(cfg.sample_rate_hz > 0.0 && cfg.duration_sec > 0.0) {
        return Err(SynthError::Config(format!("rate {} Hz, duration {} s", cfg.sample_rate_hz, cfg.duration_sec)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fs = cfg.sample_rate_hz;
    let n = (cfg.duration_sec * fs).round() as usize;
    let seizures = place_seizures(cfg, &mut rng)?;
    let common = pink_noise(&mut rng, n, cfg.background_uv);

    let names: Vec<String> = ELECTRODES.iter().map(|s| s.to_string()).chain(cfg.extra_channels.iter().cloned()).collect();
    let mut channels = Vec::with_capacity(names.len());
    for name in names {
        let mut x = pink_noise(&mut rng, n, cfg.background_uv);
        x.iter_mut().zip(&common).for_each(|(v, c)| *v += c);
        let gain = rng.random_range(0.4..1.4);
        let phase = rng.random_range(0.0..PI);
        for &(start, stop) in &seizures {
            let onset = start + rng.random_range(-cfg.onset_jitter_sec..=cfg.onset_jitter_sec);
            let dur = stop - start;
            let f = cfg.burst_hz * rng.random_range(0.9..1.1);
            let am_hz = rng.random_range(0.1..0.3);
            let first = ((onset * fs).floor().max(0.0)) as usize;
            let last = (((onset + dur) * fs).ceil() as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(last).skip(first) {
                let t = i as f64 / fs - onset;
                let env = raised_cosine(t, dur, 1.0) * (0.8 + 0.2 * (2.0 * PI * am_hz * t).sin());
                let wave = (2.0 * PI * f * t + phase).sin() + 0.35 * (4.0 * PI * f * t + 2.0 * phase).sin();
                *v += cfg.seizure_uv * gain * env * wave;
            }
        }
        channels.push(Channel::new(name, x));
    }
    let recording = RawRecording::new(channels, fs)?;
    let total_ms = (n as f64 / fs * 1000.0).round() as u64;
    let ms: Vec<(u64, u64)> =
        seizures.iter().map(|&(a, b)| ((a * 1000.0).round() as u64, (b * 1000.0).round() as u64)).collect();
    Ok(SynthRecording { recording, reference: EventList::from_seizures(&ms, total_ms) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label;

    fn small() -> SynthConfig {
        SynthConfig { duration_sec: 200.0, n_seizures: 3, seed: 5, ..Default::default() }
    }

    #[test]
    fn shape_and_reference() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.recording.channels().len(), 19);
        assert_eq!(s.recording.sample_count(), 50_000);
        assert_eq!(s.reference.total_ms(), 200_000);
        let seiz: Vec<_> = s.reference.seizures().collect();
        assert_eq!(seiz.len(), 3);
        for e in seiz {
            assert!(e.duration_sec() >= 15.0 - 1e-3 && e.duration_sec() <= 40.0 + 1e-3);
            assert!(e.start_sec() >= 10.0 && e.stop_sec() <= 190.0);
        }
    }

    #[test]
    fn seizures_raise_power() {
        let s = generate(&small()).unwrap();
        let x = &s.recording.channel("C3").unwrap().samples;
        let power = |a: u64, b: u64| {
            let seg = &x[(a / 4) as usize..(b / 4) as usize];
            seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64
        };
        let e = s.reference.seizures().next().unwrap();
        let bckg = s.reference.events().iter().find(|e| e.label == Label::Bckg).unwrap();
        assert!(power(e.start_ms + 2000, e.stop_ms - 2000) > 2.0 * power(bckg.start_ms, bckg.stop_ms));
    }

    #[test]
    fn seeded_and_extra_channels() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.recording, b.recording);
        let c = generate(&SynthConfig { seed: 6, ..small() }).unwrap();
        assert_ne!(a.recording, c.recording);
        let d = generate(&SynthConfig { extra_channels: vec!["A1".into()], ..small() }).unwrap();
        assert_eq!(d.recording.channels().len(), 20);
    }

    #[test]
    fn too_many_seizures() {
        assert!(generate(&SynthConfig { duration_sec: 60.0, n_seizures: 5, ..Default::default() }).is_err());
    }
}
