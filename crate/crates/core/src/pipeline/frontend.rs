//! Signal -> image front end, offline and frame-at-a-time. Both paths run
//! the same arithmetic in the same order and produce identical images.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{PipelineConfig, PipelineError, Result};
use crate::signal_io::{apply_montage, decimate, design_antialias_fir, FirDecimator, MontageSpec, MontagedRecording, RawRecording};
use crate::windowing::{
    extract_windows, resize_bicubic, scale_recording, to_grayscale, GrayscaleImage, ScaledWindow, StreamingScaler,
    WindowingError,
};

/// Wall-clock time spent in each front-end stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrontEndTimings {
    pub montage: Duration,
    pub decimate: Duration,
    pub scale: Duration,
    /// Window assembly, grayscale conversion and resize.
    pub image: Duration,
}

fn to_image(w: &ScaledWindow, size: usize) -> Result<GrayscaleImage> {
    let g = to_grayscale(w)?;
    if g.height() == size && g.width() == size {
        return Ok(g);
    }
    Ok(resize_bicubic(&g, size, size)?)
}

/// Montage, decimate and scale a whole recording.
pub fn offline_scaled(cfg: &PipelineConfig, montage: Option<&MontageSpec>, rec: &RawRecording) -> Result<(MontagedRecording, f64)> {
    let montaged = match montage {
        Some(spec) => apply_montage(rec, spec)?,
        None => MontagedRecording::new(rec.channels().to_vec(), rec.sample_rate_hz())?,
    };
    let dec = decimate(&montaged, cfg.target_hz)?;
    Ok((scale_recording(&dec.recording, &cfg.scaling_params())?, dec.group_delay_sec))
}

/// Grayscale windows at their native `channels x window_samples` size.
pub fn offline_windows(cfg: &PipelineConfig, scaled: &MontagedRecording, stride_samples: usize) -> Result<Vec<ScaledWindow>> {
    match extract_windows(scaled, cfg.window_samples, stride_samples) {
        Err(WindowingError::WindowTooLong { .. }) => Ok(Vec::new()),
        other => Ok(other?),
    }
}

/// Detector-ready images for a whole recording.
pub fn offline_images(cfg: &PipelineConfig, montage: Option<&MontageSpec>, rec: &RawRecording) -> Result<Vec<GrayscaleImage>> {
    let (scaled, _) = offline_scaled(cfg, montage, rec)?;
    offline_windows(cfg, &scaled, cfg.stride_samples)?.iter().map(|w| to_image(w, cfg.image_size)).collect()
}

/// Frame-at-a-time front end. Feed one multichannel sample per call.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pairs: Option<Vec<(usize, usize)>>,
    input_channels: usize,
    decimators: Vec<FirDecimator>,
    scalers: Vec<StreamingScaler>,
    history: Vec<VecDeque<f64>>,
    produced: usize,
    window_samples: usize,
    stride_samples: usize,
    image_size: usize,
    target_hz: f64,
    group_delay_sec: f64,
    montaged: Vec<f64>,
    decimated: Vec<f64>,
    pub timings: FrontEndTimings,
}

impl FrontEnd {
    pub fn new(cfg: &PipelineConfig, montage: Option<&MontageSpec>, channel_names: &[String], source_hz: f64) -> Result<Self> {
        cfg.validate()?;
        let pairs = montage.map(|m| m.resolve(channel_names.iter().map(String::as_str))).transpose()?;
        let n_out = pairs.as_ref().map_or(channel_names.len(), Vec::len);
        let filter = Arc::new(design_antialias_fir(source_hz, cfg.target_hz)?);
        let half = cfg.scaling_params().half_width(cfg.target_hz);
        let eps = cfg.scaling_params().epsilon;
        Ok(Self {
            pairs,
            input_channels: channel_names.len(),
            decimators: (0..n_out).map(|_| FirDecimator::new(filter.clone())).collect(),
            scalers: (0..n_out).map(|_| StreamingScaler::new(half, eps)).collect(),
            history: vec![VecDeque::with_capacity(cfg.window_samples); n_out],
            produced: 0,
            window_samples: cfg.window_samples,
            stride_samples: cfg.stride_samples,
            image_size: cfg.image_size,
            target_hz: cfg.target_hz,
            group_delay_sec: filter.group_delay_sec(),
            montaged: vec![0.0; n_out],
            decimated: vec![0.0; n_out],
            timings: FrontEndTimings::default(),
        })
    }

    pub fn group_delay_sec(&self) -> f64 {
        self.group_delay_sec
    }

    /// Samples (at the target rate) the scaler must see past a sample
    /// before that sample is final.
    pub fn scaling_lookahead_samples(&self) -> usize {
        self.scalers.first().map_or(0, StreamingScaler::lookahead)
    }

    pub fn push_frame(&mut self, frame: &[f64]) -> Result<Vec<GrayscaleImage>> {
        if frame.len() != self.input_channels {
            return Err(PipelineError::Data(format!("frame has {} values, expected {}", frame.len(), self.input_channels)));
        }
        let t0 = Instant::now();
        match &self.pairs {
            Some(pairs) => {
                for (m, &(a, c)) in self.montaged.iter_mut().zip(pairs) {
                    *m = frame[a] - frame[c];
                }
            }
            None => self.montaged.copy_from_slice(frame),
        }
        let t1 = Instant::now();
        self.timings.montage += t1 - t0;
        let mut any = false;
        for ((d, dec), &x) in self.decimated.iter_mut().zip(&mut self.decimators).zip(&self.montaged) {
            if let Some(y) = dec.push(x) {
                *d = y;
                any = true;
            }
        }
        let t2 = Instant::now();
        self.timings.decimate += t2 - t1;
        if !any {
            return Ok(Vec::new());
        }
        let mut scaled = Vec::with_capacity(self.scalers.len());
        for (s, &x) in self.scalers.iter_mut().zip(&self.decimated) {
            if let Some(v) = s.push(x) {
                scaled.push(v);
            }
        }
        self.timings.scale += t2.elapsed();
        let mut out = Vec::new();
        if !scaled.is_empty() {
            self.append(&scaled, &mut out)?;
        }
        Ok(out)
    }

    /// Flushes the scalers at end of stream.
    pub fn finish(&mut self) -> Result<Vec<GrayscaleImage>> {
        let t = Instant::now();
        let tails: Vec<Vec<f64>> = self.scalers.iter_mut().map(StreamingScaler::finish).collect();
        self.timings.scale += t.elapsed();
        let mut out = Vec::new();
        let len = tails.first().map_or(0, Vec::len);
        for k in 0..len {
            let column: Vec<f64> = tails.iter().map(|t| t[k]).collect();
            self.append(&column, &mut out)?;
        }
        Ok(out)
    }

    fn append(&mut self, column: &[f64], out: &mut Vec<GrayscaleImage>) -> Result<()> {
        let t = Instant::now();
        for (h, &v) in self.history.iter_mut().zip(column) {
            if h.len() == self.window_samples {
                h.pop_front();
            }
            h.push_back(v);
        }
        self.produced += 1;
        if self.produced >= self.window_samples && (self.produced - self.window_samples) % self.stride_samples == 0 {
            let start = self.produced - self.window_samples;
            let mut data = Vec::with_capacity(self.history.len() * self.window_samples);
            for h in &self.history {
                data.extend(h.iter());
            }
            let w = ScaledWindow::new(data, self.history.len(), self.window_samples, start as f64 / self.target_hz)?;
            out.push(to_image(&w, self.image_size)?);
        }
        self.timings.image += t.elapsed();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn streaming_equals_offline() {
        let s = generate(&SynthConfig { duration_sec: 40.0, n_seizures: 1, seizure_sec: (15.0, 15.0), margin_sec: 5.0, seed: 2, ..Default::default() })
            .unwrap();
        let cfg = PipelineConfig { image_size: 64, ..Default::default() };
        let montage = MontageSpec::default_tcp();
        let offline = offline_images(&cfg, Some(&montage), &s.recording).unwrap();
        let names: Vec<String> = s.recording.channels().iter().map(|c| c.name.clone()).collect();
        let mut fe = FrontEnd::new(&cfg, Some(&montage), &names, 250.0).unwrap();
        let mut streamed = Vec::new();
        let chans = s.recording.channels();
        let mut frame = vec![0.0; chans.len()];
        for i in 0..s.recording.sample_count() {
            for (f, c) in frame.iter_mut().zip(chans) {
                *f = c.samples[i];
            }
            streamed.extend(fe.push_frame(&frame).unwrap());
        }
        streamed.extend(fe.finish().unwrap());
        assert_eq!(offline.len(), (2000 - 256) / 50 + 1);
        assert_eq!(streamed, offline);
    }
}
