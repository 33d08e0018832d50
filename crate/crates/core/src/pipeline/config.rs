//! `key = value` configuration. Blank lines and `#` comments are ignored;
//! unknown keys are errors.

use std::path::{Path, PathBuf};

use super::{PipelineError, Result};
use crate::postproc::PostprocParams;
use crate::windowing::ScalingParams;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Montage definition file; `None` uses the built-in 20-channel TCP
    /// montage. The value `none` in a config file keeps input channels as-is.
    pub montage: MontageChoice,
    pub target_hz: f64,
    /// Max-local-scaling window.
    pub window_sec: f64,
    pub window_samples: usize,
    pub stride_samples: usize,
    pub image_size: usize,
    pub model_path: Option<PathBuf>,
    pub s_th: f64,
    pub bd_min_sec: f64,
    pub sd_min_sec: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum MontageChoice {
    #[default]
    BuiltIn,
    /// Input channels are already the analysis channels.
    Identity,
    File(PathBuf),
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            montage: MontageChoice::BuiltIn,
            target_hz: 50.0,
            window_sec: 6.0,
            window_samples: 256,
            stride_samples: 50,
            image_size: 256,
            model_path: None,
            s_th: 0.5,
            bd_min_sec: 0.0,
            sd_min_sec: 0.0,
            seed: 0,
        }
    }
}

pub const CONFIG_KEYS: [&str; 11] = [
    "montage_path",
    "target_hz",
    "window_sec",
    "window_samples",
    "stride_samples",
    "image_size",
    "model_path",
    "s_th",
    "bd_min_sec",
    "sd_min_sec",
    "seed",
];

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                line: i + 1,
                msg: format!("expected 'key = value', found '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|msg| PipelineError::Config { line: i + 1, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
        Self::parse(&text).map_err(|e| match e {
            PipelineError::Config { line, msg } => PipelineError::Config { line, msg: format!("{}: {msg}", path.display()) },
            other => other,
        })
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse '{v}'"))
        }
        match key {
            "montage_path" => {
                self.montage = match value {
                    "" | "builtin" | "tcp" => MontageChoice::BuiltIn,
                    "none" => MontageChoice::Identity,
                    p => MontageChoice::File(p.into()),
                }
            }
            "target_hz" => self.target_hz = num(key, value)?,
            "window_sec" => self.window_sec = num(key, value)?,
            "window_samples" => self.window_samples = num(key, value)?,
            "stride_samples" => self.stride_samples = num(key, value)?,
            "image_size" => self.image_size = num(key, value)?,
            "model_path" => self.model_path = (!value.is_empty()).then(|| value.into()),
            "s_th" => self.s_th = num(key, value)?,
            "bd_min_sec" => self.bd_min_sec = num(key, value)?,
            "sd_min_sec" => self.sd_min_sec = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(format!("unknown key '{other}' (known: {})", CONFIG_KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config { line: 0, msg });
        if !(self.target_hz > 0.0 && self.target_hz.is_finite()) {
            return bad(format!("target_hz must be positive, got {}", self.target_hz));
        }
        if !(self.window_sec > 0.0 && self.window_sec.is_finite()) {
            return bad(format!("window_sec must be positive, got {}", self.window_sec));
        }
        if self.window_samples < 2 || self.stride_samples == 0 || self.image_size < 8 {
            return bad("window_samples >= 2, stride_samples >= 1 and image_size >= 8 are required".into());
        }
        self.postproc_params().map_err(|e| PipelineError::Config { line: 0, msg: e.to_string() })?;
        Ok(())
    }

    pub fn postproc_params(&self) -> std::result::Result<PostprocParams, crate::postproc::PostprocError> {
        PostprocParams::new(self.s_th, self.bd_min_sec, self.sd_min_sec)
    }

    pub fn scaling_params(&self) -> ScalingParams {
        ScalingParams { window_sec: self.window_sec, ..Default::default() }
    }

    pub fn stride_sec(&self) -> f64 {
        self.stride_samples as f64 / self.target_hz
    }

    /// Time covered by one analysis window.
    pub fn window_span_sec(&self) -> f64 {
        self.window_samples as f64 / self.target_hz
    }

    /// Text form accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let montage = match &self.montage {
            MontageChoice::BuiltIn => "builtin".to_string(),
            MontageChoice::Identity => "none".to_string(),
            MontageChoice::File(p) => p.display().to_string(),
        };
        let model = self.model_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        format!(
            "montage_path = {montage}\ntarget_hz = {}\nwindow_sec = {}\nwindow_samples = {}\nstride_samples = {}\n\
             image_size = {}\nmodel_path = {model}\ns_th = {}\nbd_min_sec = {}\nsd_min_sec = {}\nseed = {}\n",
            self.target_hz,
            self.window_sec,
            self.window_samples,
            self.stride_samples,
            self.image_size,
            self.s_th,
            self.bd_min_sec,
            self.sd_min_sec,
            self.seed
        )
    }
}
