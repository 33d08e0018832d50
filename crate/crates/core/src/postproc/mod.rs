//! Posterior stream -> seizure events: threshold, fill short background gaps
//! between seizures, then drop short seizures. Offline and causal forms.
//!
//! Times are held as integer milliseconds; events are half-open `[start, stop)`.

mod annotation;
mod events;
mod stream;

pub use annotation::{annotation_string, parse_annotation, read_annotation, write_annotation, ANNOTATION_VERSION};
pub use events::{ms_to_sec, sec_to_ms, Event, EventList};
pub use stream::StreamingPostprocessor;

use std::path::PathBuf;

use crate::detector::PosteriorSequence;
use crate::Label;

#[derive(Debug, thiserror::Error)]
pub enum PostprocError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid event list: {0}")]
    InvalidEvents(String),
    #[error("posterior at {start_sec} s arrived out of order (expected {expected_sec} s)")]
    OutOfOrder { start_sec: f64, expected_sec: f64 },
    #[error("{path}:{line}: {msg}")]
    Annotation { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = PostprocError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocParams {
    pub s_th: f64,
    pub bd_min_sec: f64,
    pub sd_min_sec: f64,
}

impl Default for PostprocParams {
    fn default() -> Self {
        Self { s_th: 0.5, bd_min_sec: 0.0, sd_min_sec: 0.0 }
    }
}

impl PostprocParams {
    pub fn new(s_th: f64, bd_min_sec: f64, sd_min_sec: f64) -> Result<Self> {
        let p = Self { s_th, bd_min_sec, sd_min_sec };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s_th) {
            return Err(PostprocError::InvalidParam(format!("s_th {} outside [0, 1]", self.s_th)));
        }
        check_duration("bd_min", self.bd_min_sec)?;
        check_duration("sd_min", self.sd_min_sec)?;
        Ok(())
    }

    fn bd_ms(&self) -> u64 {
        sec_to_ms(self.bd_min_sec).unwrap_or(0)
    }

    fn sd_ms(&self) -> u64 {
        sec_to_ms(self.sd_min_sec).unwrap_or(0)
    }
}

fn check_duration(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PostprocError::InvalidParam(format!("{name} {v} must be a non-negative duration")))
    }
}

/// Postprocessing delay: `bd_min + sd_min`.
pub fn detection_delay(p: &PostprocParams) -> f64 {
    p.bd_min_sec + p.sd_min_sec
}

/// Stride in ms and the per-window labels; entry `i` must start at `i * stride`.
fn window_grid(post: &PosteriorSequence) -> Result<u64> {
    let stride_ms = sec_to_ms(post.stride_sec())?;
    if stride_ms == 0 {
        return Err(PostprocError::InvalidParam(format!("stride {} s is below 1 ms", post.stride_sec())));
    }
    if let Some(&(first, _)) = post.entries().first() {
        if first.abs() > 1e-6 {
            return Err(PostprocError::InvalidParam(format!("posteriors must start at 0 s, not {first} s")));
        }
    }
    Ok(stride_ms)
}

/// Window `i` covers `[i * stride, (i + 1) * stride)` and is seizure iff
/// `p_seiz >= s_th`. Event confidence is the mean `p_seiz` of its windows.
pub fn threshold(post: &PosteriorSequence, s_th: f64) -> Result<EventList> {
    PostprocParams { s_th, ..Default::default() }.validate()?;
    let stride_ms = window_grid(post)?;
    let labels: Vec<Label> = post.p_seiz().map(|p| if p >= s_th { Label::Seiz } else { Label::Bckg }).collect();
    Ok(events_from_window_labels(&labels, &post.p_seiz().collect::<Vec<_>>(), stride_ms))
}

/// Builds maximal runs over per-window labels with left-to-right mean
/// confidences.
pub(crate) fn events_from_window_labels(labels: &[Label], p_seiz: &[f64], stride_ms: u64) -> EventList {
    let mut events = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let mut j = i;
        let mut sum = 0.0;
        while j < labels.len() && labels[j] == labels[i] {
            sum += p_seiz[j];
            j += 1;
        }
        events.push(Event {
            start_ms: i as u64 * stride_ms,
            stop_ms: j as u64 * stride_ms,
            label: labels[i],
            confidence: sum / (j - i) as f64,
        });
        i = j;
    }
    EventList::from_parts(events, labels.len() as u64 * stride_ms)
}

/// Relabels as seizure every background event lying between two seizure
/// events whose duration is below `bd_min_sec`. Leading and trailing
/// background is never touched.
pub fn fill_background_gaps(ev: &EventList, bd_min_sec: f64) -> Result<EventList> {
    check_duration("bd_min", bd_min_sec)?;
    let bd = sec_to_ms(bd_min_sec)?;
    let n = ev.events().len();
    let relabeled = ev.events().iter().enumerate().map(|(i, e)| {
        let interior = i > 0 && i + 1 < n;
        let mut e = *e;
        // neighbours of an interior background event are seizures (maximal runs)
        if e.label == Label::Bckg && interior && e.duration_ms() < bd {
            e.label = Label::Seiz;
        }
        e
    });
    Ok(EventList::merged(relabeled, ev.total_ms()))
}

/// Relabels as background every seizure event shorter than `sd_min_sec`.
pub fn remove_short_seizures(ev: &EventList, sd_min_sec: f64) -> Result<EventList> {
    check_duration("sd_min", sd_min_sec)?;
    let sd = sec_to_ms(sd_min_sec)?;
    let relabeled = ev.events().iter().map(|e| {
        let mut e = *e;
        if e.label == Label::Seiz && e.duration_ms() < sd {
            e.label = Label::Bckg;
        }
        e
    });
    Ok(EventList::merged(relabeled, ev.total_ms()))
}

/// threshold -> fill_background_gaps -> remove_short_seizures, each applied
/// once. Confidences of the result are recomputed as the mean window
/// posterior of each final event.
pub fn postprocess(post: &PosteriorSequence, p: &PostprocParams) -> Result<EventList> {
    p.validate()?;
    let stride_ms = window_grid(post)?;
    let thresholded = threshold(post, p.s_th)?;
    let filled = fill_background_gaps(&thresholded, p.bd_min_sec)?;
    let cleaned = remove_short_seizures(&filled, p.sd_min_sec)?;
    let mut labels = Vec::with_capacity(post.len());
    for e in cleaned.events() {
        let count = ((e.stop_ms - e.start_ms) / stride_ms) as usize;
        labels.extend(std::iter::repeat_n(e.label, count));
    }
    Ok(events_from_window_labels(&labels, &post.p_seiz().collect::<Vec<_>>(), stride_ms))
}
