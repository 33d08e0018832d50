use super::{PostprocError, Result};
use crate::Label;

/// Seconds to whole milliseconds (rounded).
pub fn sec_to_ms(sec: f64) -> Result<u64> {
    if !(sec >= 0.0 && sec.is_finite()) {
        return Err(PostprocError::InvalidParam(format!("time {sec} s must be non-negative")));
    }
    Ok((sec * 1000.0).round() as u64)
}

pub fn ms_to_sec(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub start_ms: u64,
    pub stop_ms: u64,
    pub label: Label,
    /// Mean seizure posterior over the event.
    pub confidence: f64,
}

impl Event {
    pub fn start_sec(&self) -> f64 {
        ms_to_sec(self.start_ms)
    }

    pub fn stop_sec(&self) -> f64 {
        ms_to_sec(self.stop_ms)
    }

    pub fn duration_ms(&self) -> u64 {
        self.stop_ms - self.start_ms
    }

    pub fn duration_sec(&self) -> f64 {
        ms_to_sec(self.duration_ms())
    }

    /// Length of the intersection with `other`, in ms.
    pub fn overlap_ms(&self, other: &Event) -> u64 {
        self.stop_ms.min(other.stop_ms).saturating_sub(self.start_ms.max(other.start_ms))
    }
}

/// Alternating-label events tiling `[0, total)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList {
    events: Vec<Event>,
    total_ms: u64,
}

impl EventList {
    /// Validates tiling and merges equal-label neighbours (confidences
    /// combine as a duration-weighted mean).
    pub fn new(events: Vec<Event>, total_ms: u64) -> Result<Self> {
        let bad = |m: String| Err(PostprocError::InvalidEvents(m));
        let mut at = 0;
        for e in &events {
            if e.start_ms != at {
                return bad(format!("event at {} ms leaves a gap or overlap at {} ms", e.start_ms, at));
            }
            if e.stop_ms <= e.start_ms {
                return bad(format!("event [{}, {}) ms is empty", e.start_ms, e.stop_ms));
            }
            if !(0.0..=1.0).contains(&e.confidence) {
                return bad(format!("confidence {} outside [0, 1]", e.confidence));
            }
            at = e.stop_ms;
        }
        if at != total_ms {
            return bad(format!("events end at {at} ms but the total is {total_ms} ms"));
        }
        Ok(Self::merged(events, total_ms))
    }

    pub(crate) fn from_parts(events: Vec<Event>, total_ms: u64) -> Self {
        debug_assert!(Self::new(events.clone(), total_ms).is_ok());
        Self { events, total_ms }
    }

    pub(crate) fn merged(events: impl IntoIterator<Item = Event>, total_ms: u64) -> Self {
        let mut out: Vec<Event> = Vec::new();
        for e in events {
            match out.last_mut() {
                Some(last) if last.label == e.label => {
                    let (d1, d2) = (last.duration_ms() as f64, e.duration_ms() as f64);
                    last.confidence = (last.confidence * d1 + e.confidence * d2) / (d1 + d2);
                    last.stop_ms = e.stop_ms;
                }
                _ => out.push(e),
            }
        }
        Self { events: out, total_ms }
    }

    /// Reference-style list: the given seizure intervals (confidence 1) and
    /// background (confidence 0) everywhere else. Intervals may overlap and
    /// are clipped to `[0, total)`.
    pub fn from_seizures(seizures: &[(u64, u64)], total_ms: u64) -> Self {
        let mut iv: Vec<(u64, u64)> =
            seizures.iter().map(|&(a, b)| (a.min(total_ms), b.min(total_ms))).filter(|(a, b)| a < b).collect();
        iv.sort_unstable();
        let mut events = Vec::new();
        let mut at = 0;
        for (a, b) in iv {
            if b <= at {
                continue;
            }
            let a = a.max(at);
            if a > at {
                events.push(Event { start_ms: at, stop_ms: a, label: Label::Bckg, confidence: 0.0 });
            }
            events.push(Event { start_ms: a, stop_ms: b, label: Label::Seiz, confidence: 1.0 });
            at = b;
        }
        if at < total_ms {
            events.push(Event { start_ms: at, stop_ms: total_ms, label: Label::Bckg, confidence: 0.0 });
        }
        Self::merged(events, total_ms)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_ms(&self) -> u64 {
        self.total_ms
    }

    pub fn total_sec(&self) -> f64 {
        ms_to_sec(self.total_ms)
    }

    pub fn seizures(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.label == Label::Seiz)
    }

    /// Label of the event containing `ms`, if any.
    pub fn label_at(&self, ms: u64) -> Option<Label> {
        let i = self.events.partition_point(|e| e.stop_ms <= ms);
        self.events.get(i).map(|e| e.label)
    }

    /// Stretches the last event (or adds background) so the list covers
    /// `[0, total_ms)`.
    pub fn extend_to(&self, total_ms: u64) -> Result<Self> {
        if total_ms < self.total_ms {
            return Err(PostprocError::InvalidEvents(format!(
                "cannot shrink events from {} ms to {total_ms} ms",
                self.total_ms
            )));
        }
        let mut out = self.clone();
        out.total_ms = total_ms;
        match out.events.last_mut() {
            Some(last) => last.stop_ms = total_ms,
            None if total_ms > 0 => {
                out.events.push(Event { start_ms: 0, stop_ms: total_ms, label: Label::Bckg, confidence: 0.0 })
            }
            None => {}
        }
        Ok(out)
    }

    /// This list followed by `other`, shifted to start at `self.total_ms()`.
    pub fn concat(&self, other: &EventList) -> Self {
        let shift = self.total_ms;
        let shifted = other.events.iter().map(|e| Event { start_ms: e.start_ms + shift, stop_ms: e.stop_ms + shift, ..*e });
        Self::merged(self.events.iter().copied().chain(shifted), shift + other.total_ms)
    }
}
