//! Recording ingest: file formats, differential montages and anti-aliased
//! decimation to the working rate.

mod decimate;
mod format;
mod montage;

pub use decimate::{decimate, design_antialias_fir, Decimated, FirDecimator, FirFilter};
pub use format::{load_recording, read_binary, read_csv, write_binary, write_csv, RecordingFormat};
pub use montage::{apply_montage, MontagePair, MontageSpec, DEFAULT_MONTAGE};

use std::collections::HashSet;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Csv { path: PathBuf, line: usize, msg: String },
    #[error("{path}: byte offset {offset}: {msg}")]
    Binary { path: PathBuf, offset: u64, msg: String },
    #[error("ragged channels: channel {channel:?} has {got} samples, expected {expected}")]
    Ragged { channel: String, got: usize, expected: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("duplicate channel name {0:?}")]
    DuplicateChannel(String),
    #[error("recording has no channels")]
    NoChannels,
    #[error("montage references unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("montage line {line}: {msg}")]
    MontageSyntax { line: usize, msg: String },
    #[error("montage has no pairs")]
    EmptyMontage,
    #[error("cannot decimate {from_hz} Hz to {to_hz} Hz: {msg}")]
    Decimation { from_hz: f64, to_hz: f64, msg: String },
}

pub type Result<T, E = SignalError> = std::result::Result<T, E>;

/// One named channel of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Self { name: name.into(), samples }
    }
}

fn validate_channels(channels: &[Channel], rate_hz: f64) -> Result<()> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(SignalError::BadRate(rate_hz));
    }
    let Some(first) = channels.first() else {
        return Err(SignalError::NoChannels);
    };
    let expected = first.samples.len();
    let mut seen = HashSet::new();
    for ch in channels {
        if ch.samples.len() != expected {
            return Err(SignalError::Ragged {
                channel: ch.name.clone(),
                got: ch.samples.len(),
                expected,
            });
        }
        if !seen.insert(ch.name.as_str()) {
            return Err(SignalError::DuplicateChannel(ch.name.clone()));
        }
    }
    Ok(())
}

/// Raw electrode signals in microvolts, all channels sampled together.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    channels: Vec<Channel>,
    sample_rate_hz: f64,
}

impl RawRecording {
    pub fn new(channels: Vec<Channel>, sample_rate_hz: f64) -> Result<Self> {
        validate_channels(&channels, sample_rate_hz)?;
        Ok(Self { channels, sample_rate_hz })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn sample_count(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn duration_sec(&self) -> f64 {
        self.sample_count() as f64 / self.sample_rate_hz
    }

    pub fn into_channels(self) -> Vec<Channel> {
        self.channels
    }
}

/// Differential channels produced by a montage (and, later, decimation and
/// scaling). Channel names are the `ANODE-CATHODE` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MontagedRecording {
    channels: Vec<Channel>,
    sample_rate_hz: f64,
}

impl MontagedRecording {
    pub fn new(channels: Vec<Channel>, sample_rate_hz: f64) -> Result<Self> {
        validate_channels(&channels, sample_rate_hz)?;
        Ok(Self { channels, sample_rate_hz })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn sample_count(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn duration_sec(&self) -> f64 {
        self.sample_count() as f64 / self.sample_rate_hz
    }

    /// Applies `f` to every channel's samples, keeping labels and rate.
    pub fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| Channel::new(c.name.clone(), f(&c.samples)))
            .collect();
        Self { channels, sample_rate_hz: self.sample_rate_hz }
    }
}
