//! The causal pipeline as a push-driven object: raw frames in, decided
//! events out.

use std::time::{Duration, Instant};

use super::{check_model, load_montage, FrontEnd, FrontEndTimings, PipelineConfig, PipelineError, Result, RunOutput};
use crate::detector::{DetectorModel, PosteriorSequence};
use crate::postproc::{sec_to_ms, Event, EventList, StreamingPostprocessor};

/// Wall-clock time per stage, accumulated over the session.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StreamTimings {
    pub front_end: FrontEndTimings,
    pub inference: Duration,
    pub postproc: Duration,
}

/// Frame-at-a-time detection session. Decided events accumulate in
/// [`events`](Self::events) in time order; once [`finish`](Self::finish)
/// has run they cover every classified window.
pub struct StreamingPipeline<M> {
    model: M,
    front_end: FrontEnd,
    postproc: StreamingPostprocessor,
    posteriors: PosteriorSequence,
    events: Vec<Event>,
    frames: usize,
    source_hz: f64,
    inference: Duration,
    postproc_time: Duration,
    finished: bool,
}

impl<M: DetectorModel> StreamingPipeline<M> {
    pub fn new(cfg: &PipelineConfig, model: M, channel_names: &[String], source_hz: f64) -> Result<Self> {
        cfg.validate()?;
        check_model(cfg, &model)?;
        let montage = load_montage(cfg)?;
        Ok(Self {
            front_end: FrontEnd::new(cfg, montage.as_ref(), channel_names, source_hz)?,
            postproc: StreamingPostprocessor::new(cfg.postproc_params()?, cfg.stride_sec())?,
            posteriors: PosteriorSequence::new(cfg.stride_sec())?,
            model,
            events: Vec::new(),
            frames: 0,
            source_hz,
            inference: Duration::ZERO,
            postproc_time: Duration::ZERO,
            finished: false,
        })
    }

    /// Feeds one multichannel sample; returns how many events were decided.
    pub fn push_frame(&mut self, frame: &[f64]) -> Result<usize> {
        if self.finished {
            return Err(PipelineError::Data("stream already finished".into()));
        }
        let images = self.front_end.push_frame(frame)?;
        self.frames += 1;
        self.classify(images)
    }

    /// Flushes the end of the stream; further pushes are errors.
    pub fn finish(&mut self) -> Result<usize> {
        if self.finished {
            return Ok(0);
        }
        self.finished = true;
        let images = self.front_end.finish()?;
        let mut n = self.classify(images)?;
        let t = Instant::now();
        let tail = self.postproc.finish();
        self.postproc_time += t.elapsed();
        n += tail.len();
        self.events.extend(tail);
        Ok(n)
    }

    fn classify(&mut self, images: Vec<crate::windowing::GrayscaleImage>) -> Result<usize> {
        let before = self.events.len();
        for img in images {
            let t0 = Instant::now();
            let p = self.model.predict(&img)?[1];
            let t1 = Instant::now();
            self.posteriors.push(img.start_sec, p)?;
            self.events.extend(self.postproc.push(img.start_sec, p)?);
            self.inference += t1 - t0;
            self.postproc_time += t1.elapsed();
        }
        Ok(self.events.len() - before)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn posteriors(&self) -> &PosteriorSequence {
        &self.posteriors
    }

    pub fn frames_consumed(&self) -> usize {
        self.frames
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn group_delay_sec(&self) -> f64 {
        self.front_end.group_delay_sec()
    }

    pub fn scaling_lookahead_samples(&self) -> usize {
        self.front_end.scaling_lookahead_samples()
    }

    pub fn max_lag_sec(&self) -> f64 {
        self.postproc.max_lag_sec()
    }

    pub fn timings(&self) -> StreamTimings {
        StreamTimings { front_end: self.front_end.timings, inference: self.inference, postproc: self.postproc_time }
    }

    /// The hypothesis over everything pushed so far, padded with
    /// background to the input duration. Requires [`finish`](Self::finish).
    pub fn hypothesis(&self) -> Result<EventList> {
        if !self.finished {
            return Err(PipelineError::Data("hypothesis requested before finish".into()));
        }
        let covered = self.posteriors.len() as u64 * sec_to_ms(self.posteriors.stride_sec())?;
        let total = (self.frames as f64 / self.source_hz * 1000.0).round() as u64;
        Ok(EventList::new(self.events.clone(), covered)?.extend_to(total.max(covered))?)
    }

    pub fn output(&self) -> Result<RunOutput> {
        Ok(RunOutput { posteriors: self.posteriors.clone(), events: self.hypothesis()?, max_lag_sec: self.max_lag_sec() })
    }
}
