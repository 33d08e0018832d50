//! Causal postprocessing. Windows are decided as soon as no future posterior
//! can change their final label; complete events are emitted once decided
//! and never retracted.
//!
//! State is a single open seizure "group": thresholded seizure runs joined
//! by gaps that may still be filled. The group closes when its trailing gap
//! reaches `bd_min` (the gap can no longer be filled) and is kept iff its
//! span reaches `sd_min`. A group whose span already reaches `sd_min` is
//! confirmed early, which decides every window up to its current end.

use std::collections::VecDeque;

use super::{sec_to_ms, Event, EventList, PostprocError, PostprocParams, Result};
use crate::detector::PosteriorSequence;
use crate::Label;

#[derive(Debug, Clone, Copy)]
struct Group {
    start: usize,
    /// One past the last seizure window.
    end: usize,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start: usize,
    label: Label,
    sum: f64,
    count: usize,
}

#[derive(Debug, Clone)]
pub struct StreamingPostprocessor {
    params: PostprocParams,
    stride_sec: f64,
    stride_ms: u64,
    bd_ms: u64,
    sd_ms: u64,
    seen: usize,
    frontier: usize,
    /// Posteriors of windows `frontier..seen`.
    pending: VecDeque<f64>,
    group: Option<Group>,
    run: Option<Run>,
    max_lag_ms: u64,
    finished: bool,
}

impl StreamingPostprocessor {
    pub fn new(params: PostprocParams, stride_sec: f64) -> Result<Self> {
        params.validate()?;
        let stride_ms = sec_to_ms(stride_sec)?;
        if stride_ms == 0 {
            return Err(PostprocError::InvalidParam(format!("stride {stride_sec} s is below 1 ms")));
        }
        Ok(Self {
            params,
            stride_sec,
            stride_ms,
            bd_ms: params.bd_ms(),
            sd_ms: params.sd_ms(),
            seen: 0,
            frontier: 0,
            pending: VecDeque::new(),
            group: None,
            run: None,
            max_lag_ms: 0,
            finished: false,
        })
    }

    pub fn params(&self) -> &PostprocParams {
        &self.params
    }

    /// Windows whose final label is known.
    pub fn decided_windows(&self) -> usize {
        self.frontier
    }

    pub fn windows_seen(&self) -> usize {
        self.seen
    }

    /// Largest observed gap between a window's start and the arrival of the
    /// posterior that decided it (arrival = end of the latest window).
    pub fn max_lag_sec(&self) -> f64 {
        self.max_lag_ms as f64 / 1000.0
    }

    /// Feeds the posterior of the window starting at `start_sec`; returns the
    /// events completed by it.
    pub fn push(&mut self, start_sec: f64, p_seiz: f64) -> Result<Vec<Event>> {
        if self.finished {
            return Err(PostprocError::InvalidParam("push after finish".into()));
        }
        let expected_sec = self.seen as f64 * self.stride_sec;
        if (start_sec - expected_sec).abs() > 1e-6 {
            return Err(PostprocError::OutOfOrder { start_sec, expected_sec });
        }
        if !(0.0..=1.0).contains(&p_seiz) {
            return Err(PostprocError::InvalidParam(format!("posterior {p_seiz} outside [0, 1]")));
        }
        let i = self.seen;
        self.seen += 1;
        self.pending.push_back(p_seiz);
        let mut out = Vec::new();
        if p_seiz >= self.params.s_th {
            match self.group.as_mut() {
                Some(g) => g.end = i + 1,
                None => self.group = Some(Group { start: i, end: i + 1 }),
            }
        } else {
            match self.group {
                None => self.decide(self.seen, Label::Bckg, &mut out),
                Some(g) => {
                    if (self.seen - g.end) as u64 * self.stride_ms >= self.bd_ms {
                        self.close(g, &mut out);
                    }
                }
            }
        }
        if let Some(g) = self.group {
            if self.span_ms(g) >= self.sd_ms {
                self.decide(g.end, Label::Seiz, &mut out);
            }
        }
        Ok(out)
    }

    /// Ends the stream: trailing gaps stay background and an open group is
    /// kept only if long enough. Returns the remaining events.
    pub fn finish(&mut self) -> Vec<Event> {
        let mut out = Vec::new();
        if self.finished {
            return out;
        }
        self.finished = true;
        if let Some(g) = self.group {
            self.close(g, &mut out);
        }
        if let Some(r) = self.run.take() {
            out.push(self.event_of(r));
        }
        out
    }

    /// Runs a whole sequence; returns the events and the maximum lag.
    pub fn process(post: &PosteriorSequence, params: &PostprocParams) -> Result<(EventList, f64)> {
        let mut sp = Self::new(*params, post.stride_sec())?;
        let mut events = Vec::new();
        for &(t, p) in post.entries() {
            events.extend(sp.push(t, p)?);
        }
        events.extend(sp.finish());
        let total = sp.seen as u64 * sp.stride_ms;
        Ok((EventList::from_parts(events, total), sp.max_lag_sec()))
    }

    fn span_ms(&self, g: Group) -> u64 {
        (g.end - g.start) as u64 * self.stride_ms
    }

    fn close(&mut self, g: Group, out: &mut Vec<Event>) {
        if self.span_ms(g) >= self.sd_ms {
            self.decide(g.end, Label::Seiz, out);
        }
        self.decide(self.seen, Label::Bckg, out);
        self.group = None;
    }

    /// Assigns `label` to windows `frontier..upto`.
    fn decide(&mut self, upto: usize, label: Label, out: &mut Vec<Event>) {
        if upto <= self.frontier {
            return;
        }
        let lag = (self.seen - self.frontier) as u64 * self.stride_ms;
        self.max_lag_ms = self.max_lag_ms.max(lag);
        for j in self.frontier..upto {
            let p = self.pending.pop_front().expect("pending covers undecided windows");
            match self.run.as_mut() {
                Some(r) if r.label == label => {
                    r.sum += p;
                    r.count += 1;
                }
                _ => {
                    if let Some(r) = self.run.take() {
                        out.push(self.event_of(r));
                    }
                    self.run = Some(Run { start: j, label, sum: p, count: 1 });
                }
            }
        }
        self.frontier = upto;
    }

    fn event_of(&self, r: Run) -> Event {
        Event {
            start_ms: r.start as u64 * self.stride_ms,
            stop_ms: (r.start + r.count) as u64 * self.stride_ms,
            label: r.label,
            confidence: r.sum / r.count as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::postprocess;

    #[test]
    fn matches_offline_example() {
        let post = PosteriorSequence::from_probs(1.0, &[0.2, 0.8, 0.8, 0.1, 0.9, 0.9, 0.9, 0.2, 0.2]).unwrap();
        let p = PostprocParams::new(0.5, 2.0, 3.0).unwrap();
        let (ev, lag) = StreamingPostprocessor::process(&post, &p).unwrap();
        assert_eq!(ev, postprocess(&post, &p).unwrap());
        assert!(lag <= 2.0 + 3.0 + 1.0);
    }

    #[test]
    fn short_pending_seizure_flushed_as_background() {
        let post = PosteriorSequence::from_probs(1.0, &[0.1, 0.1, 0.9, 0.9]).unwrap();
        let p = PostprocParams::new(0.5, 1.0, 5.0).unwrap();
        let mut sp = StreamingPostprocessor::new(p, 1.0).unwrap();
        let mut emitted = Vec::new();
        for &(t, q) in post.entries() {
            emitted.extend(sp.push(t, q).unwrap());
        }
        assert!(emitted.is_empty());
        let tail = sp.finish();
        assert_eq!(tail.len(), 1);
        assert_eq!((tail[0].label, tail[0].stop_ms), (Label::Bckg, 4000));
    }

    #[test]
    fn events_emitted_before_stream_end() {
        let mut sp = StreamingPostprocessor::new(PostprocParams::new(0.5, 1.0, 2.0).unwrap(), 1.0).unwrap();
        let p = [0.1, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1];
        let mut first_emit = None;
        for (i, &q) in p.iter().enumerate() {
            if !sp.push(i as f64, q).unwrap().is_empty() && first_emit.is_none() {
                first_emit = Some(i);
            }
        }
        // the background prefix completes once the seizure is confirmed
        assert_eq!(first_emit, Some(2));
    }

    #[test]
    fn rejects_out_of_order() {
        let mut sp = StreamingPostprocessor::new(PostprocParams::default(), 1.0).unwrap();
        sp.push(0.0, 0.3).unwrap();
        assert!(matches!(sp.push(0.0, 0.3), Err(PostprocError::OutOfOrder { .. })));
        assert!(sp.push(1.0, 2.0).is_err());
    }
}
