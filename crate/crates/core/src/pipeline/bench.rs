//! Throughput and latency measurement over a replayed stream.

use std::time::{Duration, Instant};

use super::{PipelineConfig, Result, StreamingPipeline};
use crate::detector::DetectorModel;
use crate::postproc::detection_delay;
use crate::signal_io::RawRecording;

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub montage: f64,
    pub decimate: f64,
    pub scale: f64,
    pub image: f64,
    pub inference: f64,
    pub postproc: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.montage + self.decimate + self.scale + self.image + self.inference + self.postproc
    }
}

/// Algorithmic latency from a sample entering the pipeline to the decision
/// that covers it, split by cause. `total_sec` is the sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub filter_group_delay_sec: f64,
    /// Forward half of the centred scaling window.
    pub scaling_lookahead_sec: f64,
    /// Buffering one full window before it can be classified.
    pub window_span_sec: f64,
    /// `bd_min + sd_min`.
    pub postproc_delay_sec: f64,
    pub total_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub recording_sec: f64,
    pub processing_sec: f64,
    /// `processing_sec / recording_sec`.
    pub xrt: f64,
    /// Mean compute time of the pushes that released a window, per window.
    pub per_window_latency_ms: f64,
    pub n_windows: usize,
    pub stages: StageTimings,
    pub latency: LatencyBreakdown,
    /// Largest observed gap between the start of a window's content and the
    /// input frame that released it.
    pub measured_front_end_latency_sec: f64,
    /// Largest observed postprocessing decision lag.
    pub measured_max_decision_lag_sec: f64,
    pub peak_memory_bytes: Option<u64>,
    pub pinned: bool,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let l = &self.latency;
        let s = &self.stages;
        let mem = self.peak_memory_bytes.map_or("unknown".to_string(), |b| b.to_string());
        format!(
            "recording_sec = {:.3}\nprocessing_sec = {:.6}\nxrt = {:.6}\nn_windows = {}\nper_window_latency_ms = {:.3}\n\
             stage_montage_sec = {:.6}\nstage_decimate_sec = {:.6}\nstage_scale_sec = {:.6}\nstage_image_sec = {:.6}\n\
             stage_inference_sec = {:.6}\nstage_postproc_sec = {:.6}\n\
             latency_filter_group_delay_sec = {:.3}\nlatency_scaling_lookahead_sec = {:.3}\nlatency_window_span_sec = {:.3}\n\
             latency_postproc_delay_sec = {:.3}\nlatency_total_sec = {:.3}\n\
             measured_front_end_latency_sec = {:.3}\nmeasured_max_decision_lag_sec = {:.3}\n\
             peak_memory_bytes = {mem}\npinned_single_core = {}\n",
            self.recording_sec,
            self.processing_sec,
            self.xrt,
            self.n_windows,
            self.per_window_latency_ms,
            s.montage,
            s.decimate,
            s.scale,
            s.image,
            s.inference,
            s.postproc,
            l.filter_group_delay_sec,
            l.scaling_lookahead_sec,
            l.window_span_sec,
            l.postproc_delay_sec,
            l.total_sec,
            self.measured_front_end_latency_sec,
            self.measured_max_decision_lag_sec,
            self.pinned,
        )
    }
}

/// Restricts the calling thread to the first CPU it may run on. Returns
/// whether that succeeded.
#[cfg(target_os = "linux")]
pub fn pin_to_single_core() -> bool {
    // SAFETY: cpu_set_t is plain data; both calls only read/write the set we own.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return false;
        }
        let Some(cpu) = (0..libc::CPU_SETSIZE as usize).find(|&c| libc::CPU_ISSET(c, &set)) else {
            return false;
        };
        let mut one: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu, &mut one);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &one) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_to_single_core() -> bool {
    false
}

/// Peak resident set size (VmHWM) where the platform exposes it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Replays `rec` through the streaming pipeline and times it.
pub fn run_bench(cfg: &PipelineConfig, model: &dyn DetectorModel, rec: &RawRecording, pin: bool) -> Result<BenchReport> {
    let pinned = pin && pin_to_single_core();
    let fs = rec.sample_rate_hz();
    let names: Vec<String> = rec.channels().iter().map(|c| c.name.clone()).collect();
    let chans = rec.channels();
    let mut frame = vec![0.0; chans.len()];

    let t0 = Instant::now();
    let mut sp = StreamingPipeline::new(cfg, model, &names, fs)?;
    let gd = sp.group_delay_sec();
    // compute spent on pushes that released windows, and the worst gap
    // between a window's content start and the frame that released it
    let mut window_compute = Duration::ZERO;
    let mut worst_gap = 0.0f64;
    let mut seen = 0;
    for i in 0..rec.sample_count() {
        for (f, c) in frame.iter_mut().zip(chans) {
            *f = c.samples[i];
        }
        let t = Instant::now();
        sp.push_frame(&frame)?;
        let n = sp.posteriors().len();
        if n > seen {
            window_compute += t.elapsed();
            for &(start, _) in &sp.posteriors().entries()[seen..n] {
                worst_gap = worst_gap.max((i + 1) as f64 / fs - (start - gd));
            }
            seen = n;
        }
    }
    let t = Instant::now();
    sp.finish()?;
    window_compute += t.elapsed();
    let out = sp.output()?;
    let processing_sec = t0.elapsed().as_secs_f64();
    let n_windows = out.posteriors.len();

    let latency = {
        let filter_group_delay_sec = gd;
        let scaling_lookahead_sec = sp.scaling_lookahead_samples() as f64 / cfg.target_hz;
        let window_span_sec = cfg.window_span_sec();
        let postproc_delay_sec = detection_delay(&cfg.postproc_params()?);
        LatencyBreakdown {
            filter_group_delay_sec,
            scaling_lookahead_sec,
            window_span_sec,
            postproc_delay_sec,
            total_sec: filter_group_delay_sec + scaling_lookahead_sec + window_span_sec + postproc_delay_sec,
        }
    };
    let st = sp.timings();
    let fe = st.front_end;
    let stages = StageTimings {
        montage: fe.montage.as_secs_f64(),
        decimate: fe.decimate.as_secs_f64(),
        scale: fe.scale.as_secs_f64(),
        image: fe.image.as_secs_f64(),
        inference: st.inference.as_secs_f64(),
        postproc: st.postproc.as_secs_f64(),
    };
    let recording_sec = rec.duration_sec();
    Ok(BenchReport {
        recording_sec,
        processing_sec,
        xrt: processing_sec / recording_sec,
        per_window_latency_ms: if n_windows == 0 { 0.0 } else { window_compute.as_secs_f64() * 1e3 / n_windows as f64 },
        n_windows,
        stages,
        latency,
        measured_front_end_latency_sec: worst_gap,
        measured_max_decision_lag_sec: out.max_lag_sec,
        peak_memory_bytes: peak_memory_bytes(),
        pinned,
    })
}
