//! C ABI for the ictal pipeline.
//!
//! Every function returns an [`IctalStatus`]; on failure a message for the
//! calling thread is available from [`ictal_last_error_message`]. Objects
//! are opaque handles created by `*_new`/`*_load`/`*_read` functions and
//! released with the matching `*_free`. Handles are not thread safe; use
//! one per thread or serialise access.
//!
//! Pointer arguments must be valid for the documented length and, for
//! strings, NUL-terminated UTF-8. Null pointers are reported as
//! `ICTAL_STATUS_NULL_POINTER` rather than dereferenced.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use ictal::detector::{load_model, DetectorError, DetectorModel, MiniResNet};
use ictal::pipeline::{PipelineConfig, PipelineError, StreamingPipeline};
use ictal::postproc::{read_annotation, write_annotation, Event, EventList, PostprocError};
use ictal::scoring::{score_epoch, score_ovlp, ScoreError, ScoreReport};
use ictal::signal_io::SignalError;
use ictal::windowing::{GrayscaleImage, WindowingError};
use ictal::Label;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IctalStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad parameter, configuration key or value, or a call out of order.
    InvalidArgument = 2,
    Io = 3,
    /// Malformed file contents.
    Format = 4,
    /// Input data the pipeline cannot process.
    Data = 5,
    Internal = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IctalLabel {
    Background = 0,
    Seizure = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IctalEvent {
    pub start_sec: f64,
    pub stop_sec: f64,
    pub label: IctalLabel,
    /// Mean seizure posterior over the windows behind the event.
    pub confidence: f64,
}

/// Scores are percentages; an undefined ratio (empty denominator) is NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IctalScore {
    pub sensitivity_pct: f64,
    pub specificity_pct: f64,
    pub fa_per_24h: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub total_dur_sec: f64,
}

pub struct IctalConfig {
    inner: PipelineConfig,
}

pub struct IctalDetector {
    model: Arc<MiniResNet>,
}

pub struct IctalStream {
    inner: StreamingPipeline<Arc<MiniResNet>>,
    channels: usize,
    /// Index of the next event handed out by `ictal_stream_next_event`.
    cursor: usize,
}

pub struct IctalEvents {
    inner: EventList,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Pipeline(PipelineError),
}

macro_rules! from_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Pipeline(e.into())
            }
        }
    )*};
}
from_error!(PipelineError, DetectorError, PostprocError, ScoreError, SignalError, WindowingError);

fn pipeline_status(e: &PipelineError) -> IctalStatus {
    use PipelineError as P;
    match e {
        P::Io { .. }
        | P::Signal(SignalError::Io { .. })
        | P::Detector(DetectorError::Io { .. })
        | P::Postproc(PostprocError::Io { .. })
        | P::Windowing(WindowingError::Io { .. }) => IctalStatus::Io,
        P::Signal(SignalError::Csv { .. } | SignalError::Binary { .. } | SignalError::MontageSyntax { .. })
        | P::Detector(DetectorError::Format { .. })
        | P::Postproc(PostprocError::Annotation { .. })
        | P::Windowing(WindowingError::Pgm { .. }) => IctalStatus::Format,
        _ => match e.exit_code() {
            1 => IctalStatus::InvalidArgument,
            3 => IctalStatus::Internal,
            _ => IctalStatus::Data,
        },
    }
}

/// Runs `f`, translating failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IctalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IctalStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            IctalStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            IctalStatus::InvalidArgument
        }
        Ok(Err(Failure::Pipeline(e))) => {
            set_last_error(e.to_string());
            pipeline_status(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            IctalStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn event_to_c(e: &Event) -> IctalEvent {
    IctalEvent {
        start_sec: e.start_sec(),
        stop_sec: e.stop_sec(),
        label: match e.label {
            Label::Bckg => IctalLabel::Background,
            Label::Seiz => IctalLabel::Seizure,
        },
        confidence: e.confidence,
    }
}

fn score_to_c(s: &ScoreReport) -> IctalScore {
    IctalScore {
        sensitivity_pct: s.sensitivity_pct.unwrap_or(f64::NAN),
        specificity_pct: s.specificity_pct.unwrap_or(f64::NAN),
        fa_per_24h: s.fa_per_24h,
        true_positives: s.tp as u64,
        false_positives: s.fp as u64,
        false_negatives: s.fn_ as u64,
        true_negatives: s.tn as u64,
        total_dur_sec: s.total_dur_sec,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ictal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn ictal_status_string(status: IctalStatus) -> *const c_char {
    let s: &'static str = match status {
        IctalStatus::Ok => "ok\0",
        IctalStatus::NullPointer => "null pointer\0",
        IctalStatus::InvalidArgument => "invalid argument\0",
        IctalStatus::Io => "i/o error\0",
        IctalStatus::Format => "malformed file\0",
        IctalStatus::Data => "data error\0",
        IctalStatus::Internal => "internal error\0",
        IctalStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns its full length in
/// bytes, excluding the terminator. Returns 0 when there is no message.
/// Pass a null `buf` to query the length.
#[no_mangle]
pub unsafe extern "C" fn ictal_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// A configuration holding the defaults.
#[no_mangle]
pub unsafe extern "C" fn ictal_config_new(out: *mut *mut IctalConfig) -> IctalStatus {
    guard(|| put(out, IctalConfig { inner: PipelineConfig::default() }))
}

/// Parses a `key = value` configuration file.
#[no_mangle]
pub unsafe extern "C" fn ictal_config_from_file(path: *const c_char, out: *mut *mut IctalConfig) -> IctalStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = PipelineConfig::from_file(path.as_ref())?;
        put(out, IctalConfig { inner })
    })
}

/// Sets one configuration key, with the same names and syntax as the file.
#[no_mangle]
pub unsafe extern "C" fn ictal_config_set(cfg: *mut IctalConfig, key: *const c_char, value: *const c_char) -> IctalStatus {
    guard(|| {
        let cfg = mut_arg(cfg, "config")?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        let mut next = cfg.inner.clone();
        next.set(key, value).map_err(Failure::Invalid)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_config_free(cfg: *mut IctalConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Loads a model file. Its input size must match the configuration's
/// `image_size` when used in a stream.
#[no_mangle]
pub unsafe extern "C" fn ictal_detector_load(path: *const c_char, out: *mut *mut IctalDetector) -> IctalStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = load_model(&path)?;
        put(out, IctalDetector { model: Arc::new(model) })
    })
}

/// Side length of the square images the detector expects.
#[no_mangle]
pub unsafe extern "C" fn ictal_detector_input_size(det: *const IctalDetector, out: *mut usize) -> IctalStatus {
    guard(|| {
        let det = ref_arg(det, "detector")?;
        *mut_arg(out, "output pointer")? = det.model.input_size();
        Ok(())
    })
}

/// Seizure probability of one row-major 8-bit image of
/// `input_size x input_size` pixels.
#[no_mangle]
pub unsafe extern "C" fn ictal_detector_predict(
    det: *const IctalDetector,
    pixels: *const u8,
    height: usize,
    width: usize,
    p_seiz: *mut f64,
) -> IctalStatus {
    guard(|| {
        let det = ref_arg(det, "detector")?;
        if pixels.is_null() {
            return Err(Failure::Null("pixels"));
        }
        let n = height.checked_mul(width).ok_or_else(|| Failure::Invalid("image size overflows".into()))?;
        let img = GrayscaleImage::new(height, width, std::slice::from_raw_parts(pixels, n).to_vec(), 0.0)?;
        let p = det.model.predict(&img)?[1];
        *mut_arg(p_seiz, "output pointer")? = p;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_detector_free(det: *mut IctalDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Starts a streaming session. `channel_names` lists the input channels in
/// frame order; the configuration is copied and the detector shared, so
/// both may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_new(
    cfg: *const IctalConfig,
    det: *const IctalDetector,
    channel_names: *const *const c_char,
    n_channels: usize,
    sample_rate_hz: f64,
    out: *mut *mut IctalStream,
) -> IctalStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "config")?;
        let det = ref_arg(det, "detector")?;
        if channel_names.is_null() && n_channels > 0 {
            return Err(Failure::Null("channel_names"));
        }
        let names = (0..n_channels)
            .map(|i| str_arg(*channel_names.add(i), "channel name").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let inner = StreamingPipeline::new(&cfg.inner, Arc::clone(&det.model), &names, sample_rate_hz)?;
        put(out, IctalStream { inner, channels: n_channels, cursor: 0 })
    })
}

/// Pushes `n_frames` frames of interleaved samples (`n_frames * n_channels`
/// values, frame-major).
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_push(stream: *mut IctalStream, samples: *const f64, n_frames: usize) -> IctalStatus {
    guard(|| {
        let s = mut_arg(stream, "stream")?;
        if n_frames == 0 {
            return Ok(());
        }
        if samples.is_null() {
            return Err(Failure::Null("samples"));
        }
        if s.channels == 0 {
            return Err(Failure::Invalid("stream has no channels".into()));
        }
        let n = n_frames.checked_mul(s.channels).ok_or_else(|| Failure::Invalid("frame count overflows".into()))?;
        let data = std::slice::from_raw_parts(samples, n);
        for frame in data.chunks_exact(s.channels) {
            s.inner.push_frame(frame)?;
        }
        Ok(())
    })
}

/// Marks the end of input and releases the remaining decisions.
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_finish(stream: *mut IctalStream) -> IctalStatus {
    guard(|| {
        mut_arg(stream, "stream")?.inner.finish()?;
        Ok(())
    })
}

/// Takes the next decided event, if any. `*available` is set to 1 and
/// `*event` filled when one was ready, otherwise `*available` is 0.
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_next_event(
    stream: *mut IctalStream,
    event: *mut IctalEvent,
    available: *mut i32,
) -> IctalStatus {
    guard(|| {
        let s = mut_arg(stream, "stream")?;
        let avail = mut_arg(available, "available")?;
        let ev = mut_arg(event, "event")?;
        match s.inner.events().get(s.cursor) {
            Some(e) => {
                *ev = event_to_c(e);
                s.cursor += 1;
                *avail = 1;
            }
            None => *avail = 0,
        }
        Ok(())
    })
}

/// Number of windows classified so far.
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_window_count(stream: *const IctalStream, out: *mut usize) -> IctalStatus {
    guard(|| {
        let s = ref_arg(stream, "stream")?;
        *mut_arg(out, "output pointer")? = s.inner.posteriors().len();
        Ok(())
    })
}

/// The complete hypothesis, padded with background to the input duration.
/// Only valid after `ictal_stream_finish`.
#[no_mangle]
pub unsafe extern "C" fn ictal_stream_hypothesis(stream: *const IctalStream, out: *mut *mut IctalEvents) -> IctalStatus {
    guard(|| {
        let s = ref_arg(stream, "stream")?;
        if !s.inner.is_finished() {
            return Err(Failure::Invalid("hypothesis requested before ictal_stream_finish".into()));
        }
        put(out, IctalEvents { inner: s.inner.hypothesis()? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_stream_free(stream: *mut IctalStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// Reads an annotation file.
#[no_mangle]
pub unsafe extern "C" fn ictal_events_read(path: *const c_char, out: *mut *mut IctalEvents) -> IctalStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        put(out, IctalEvents { inner: read_annotation(&path)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_events_write(events: *const IctalEvents, path: *const c_char) -> IctalStatus {
    guard(|| {
        let ev = ref_arg(events, "events")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        write_annotation(&ev.inner, &path)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_events_len(events: *const IctalEvents, out: *mut usize) -> IctalStatus {
    guard(|| {
        let ev = ref_arg(events, "events")?;
        *mut_arg(out, "output pointer")? = ev.inner.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_events_get(events: *const IctalEvents, index: usize, out: *mut IctalEvent) -> IctalStatus {
    guard(|| {
        let ev = ref_arg(events, "events")?;
        let e = ev.inner.events().get(index).ok_or_else(|| Failure::Invalid(format!("event index {index} out of range")))?;
        *mut_arg(out, "output pointer")? = event_to_c(e);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ictal_events_free(events: *mut IctalEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Any-overlap scoring. Both lists must cover the same duration.
#[no_mangle]
pub unsafe extern "C" fn ictal_score_ovlp(
    reference: *const IctalEvents,
    hypothesis: *const IctalEvents,
    out: *mut IctalScore,
) -> IctalStatus {
    guard(|| {
        let (r, h) = (ref_arg(reference, "reference")?, ref_arg(hypothesis, "hypothesis")?);
        *mut_arg(out, "output pointer")? = score_to_c(&score_ovlp(&r.inner, &h.inner)?);
        Ok(())
    })
}

/// Fixed-epoch scoring with epochs of `epoch_sec` seconds.
#[no_mangle]
pub unsafe extern "C" fn ictal_score_epoch(
    reference: *const IctalEvents,
    hypothesis: *const IctalEvents,
    epoch_sec: f64,
    out: *mut IctalScore,
) -> IctalStatus {
    guard(|| {
        let (r, h) = (ref_arg(reference, "reference")?, ref_arg(hypothesis, "hypothesis")?);
        *mut_arg(out, "output pointer")? = score_to_c(&score_epoch(&r.inner, &h.inner, epoch_sec)?);
        Ok(())
    })
}
