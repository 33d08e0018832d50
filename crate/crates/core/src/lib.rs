//! Seizure detection on multichannel EEG: signal loading and montage,
//! windowed image conversion, a small residual-network classifier,
//! event postprocessing and OVLP/EPOCH scoring.

pub mod detector;
pub mod pipeline;
pub mod postproc;
pub mod scoring;
pub mod signal_io;
pub mod synth;
pub mod windowing;

use std::fmt;
use std::str::FromStr;

/// Binary class of a window, event or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Bckg,
    Seiz,
}

impl Label {
    /// Class index in probability pairs: background 0, seizure 1.
    pub fn index(self) -> usize {
        match self {
            Label::Bckg => 0,
            Label::Seiz => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bckg => "bckg",
            Label::Seiz => "seiz",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::Bckg => Label::Seiz,
            Label::Seiz => Label::Bckg,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bckg" => Ok(Label::Bckg),
            "seiz" => Ok(Label::Seiz),
            other => Err(format!("unknown label '{other}' (expected bckg or seiz)")),
        }
    }
}
