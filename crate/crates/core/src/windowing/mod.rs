//! From scaled channels to detector-ready images: max local scaling,
//! fixed-length windows, grayscale conversion and bicubic resize.

mod resize;
mod scale;

pub use resize::{keys_kernel, resize_bicubic, round_pixel};
pub use scale::{max_local_scale, ScalingParams, StreamingScaler};

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::signal_io::MontagedRecording;

pub const DEFAULT_WINDOW_SAMPLES: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum WindowingError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("window of {window} samples is longer than the recording ({available} samples)")]
    WindowTooLong { window: usize, available: usize },
    #[error("value {value} at channel {channel}, sample {sample} lies outside [-1, 1]")]
    OutOfRange { channel: usize, sample: usize, value: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Pgm { path: PathBuf, msg: String },
}

pub type Result<T, E = WindowingError> = std::result::Result<T, E>;

/// Scales every channel of `rec` with [`max_local_scale`].
pub fn scale_recording(rec: &MontagedRecording, params: &ScalingParams) -> Result<MontagedRecording> {
    params.validate()?;
    Ok(rec.map_channels(|s| max_local_scale(s, rec.sample_rate_hz(), params)))
}

/// A `channels x window_samples` block of scaled samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledWindow {
    data: Vec<f64>,
    channel_count: usize,
    window_samples: usize,
    pub start_sec: f64,
}

impl ScaledWindow {
    pub fn new(data: Vec<f64>, channel_count: usize, window_samples: usize, start_sec: f64) -> Result<Self> {
        if data.len() != channel_count * window_samples {
            return Err(WindowingError::InvalidParam(format!(
                "{} values do not fill {channel_count}x{window_samples}",
                data.len()
            )));
        }
        Ok(Self { data, channel_count, window_samples, start_sec })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn window_samples(&self) -> usize {
        self.window_samples
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.window_samples..(channel + 1) * self.window_samples]
    }
}

/// 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
    pub start_sec: f64,
}

impl GrayscaleImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>, start_sec: f64) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(WindowingError::InvalidParam(format!(
                "{} pixels do not fill {height}x{width}",
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels, start_sec })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = self.pixels.clone();
        for row in pixels.chunks_exact_mut(self.width) {
            row.reverse();
        }
        Self { pixels, ..*self }
    }

    /// Copies the `h x w` region whose top-left corner is `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, h: usize, w: usize) -> Result<Self> {
        if y + h > self.height || x + w > self.width || h == 0 || w == 0 {
            return Err(WindowingError::InvalidParam(format!(
                "crop {h}x{w}+{y}+{x} outside {}x{}",
                self.height, self.width
            )));
        }
        let pixels = (y..y + h).flat_map(|r| &self.pixels[r * self.width + x..r * self.width + x + w]).copied();
        Self::new(h, w, pixels.collect(), self.start_sec)
    }

    /// Binary PGM (P5).
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|source| WindowingError::Io { path: path.into(), source })
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| WindowingError::Io { path: path.into(), source })?;
        let fail = |msg: &str| WindowingError::Pgm { path: path.into(), msg: msg.into() };
        // header: magic, width, height, maxval, each whitespace separated
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(fail("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| fail("bad header"))?.to_string());
        }
        if fields[0] != "P5" {
            return Err(fail("not a binary PGM (P5)"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| fail("bad header number"));
        let (w, h, max) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if max != 255 {
            return Err(fail("only 8-bit PGM is supported"));
        }
        let data = &bytes[pos + 1..];
        if data.len() != w * h {
            return Err(fail("pixel data does not match header size"));
        }
        Self::new(h, w, data.to_vec(), 0.0)
    }
}

/// Windows start at samples `0, stride, 2*stride, ...`; a trailing partial
/// window is dropped.
pub fn extract_windows(rec: &MontagedRecording, window_samples: usize, stride_samples: usize) -> Result<Vec<ScaledWindow>> {
    if window_samples == 0 || stride_samples == 0 {
        return Err(WindowingError::InvalidParam("window and stride must be at least one sample".into()));
    }
    let available = rec.sample_count();
    if window_samples > available {
        return Err(WindowingError::WindowTooLong { window: window_samples, available });
    }
    let rate = rec.sample_rate_hz();
    let channels = rec.channel_count();
    let windows = (0..=available - window_samples)
        .step_by(stride_samples)
        .map(|start| {
            let mut data = Vec::with_capacity(channels * window_samples);
            for ch in rec.channels() {
                data.extend_from_slice(&ch.samples[start..start + window_samples]);
            }
            ScaledWindow { data, channel_count: channels, window_samples, start_sec: start as f64 / rate }
        })
        .collect();
    Ok(windows)
}

/// `pixel = round_half_up((v + 1) / 2 * 255)`; rows are channels.
pub fn to_grayscale(w: &ScaledWindow) -> Result<GrayscaleImage> {
    let mut pixels = Vec::with_capacity(w.data.len());
    for (i, &v) in w.data.iter().enumerate() {
        if !(-1.0..=1.0).contains(&v) {
            return Err(WindowingError::OutOfRange {
                channel: i / w.window_samples,
                sample: i % w.window_samples,
                value: v,
            });
        }
        pixels.push(round_pixel((v + 1.0) / 2.0 * 255.0));
    }
    GrayscaleImage::new(w.channel_count, w.window_samples, pixels, w.start_sec)
}

/// Writes one `win_<start_ms>.pgm` per image into `dir`.
pub fn dump_pgm(images: &[GrayscaleImage], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| WindowingError::Io { path: dir.into(), source })?;
    for img in images {
        let ms = (img.start_sec * 1000.0).round() as u64;
        img.write_pgm(&dir.join(format!("win_{ms}.pgm")))?;
    }
    Ok(())
}
