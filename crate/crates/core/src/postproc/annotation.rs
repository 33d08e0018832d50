//! Text annotations: a `version=1` header, then one event per line as
//! `start_sec<TAB>stop_sec<TAB>label<TAB>confidence`, four decimals each.
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use super::{sec_to_ms, Event, EventList, PostprocError, Result};

pub const ANNOTATION_VERSION: u32 = 1;

pub fn annotation_string(ev: &EventList) -> String {
    let mut out = format!("version={ANNOTATION_VERSION}\n");
    for e in ev.events() {
        out.push_str(&format!("{:.4}\t{:.4}\t{}\t{:.4}\n", e.start_sec(), e.stop_sec(), e.label, e.confidence));
    }
    out
}

pub fn write_annotation(ev: &EventList, path: &Path) -> Result<()> {
    std::fs::write(path, annotation_string(ev)).map_err(|source| PostprocError::Io { path: path.into(), source })
}

pub fn read_annotation(path: &Path) -> Result<EventList> {
    let text = std::fs::read_to_string(path).map_err(|source| PostprocError::Io { path: path.into(), source })?;
    parse_annotation(&text, path)
}

/// Parses annotation text; the total duration is the last stop time.
pub fn parse_annotation(text: &str, path: &Path) -> Result<EventList> {
    let fail = |line: usize, msg: String| PostprocError::Annotation { path: path.into(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l.trim() == format!("version={ANNOTATION_VERSION}") => {}
        Some((i, l)) => return Err(fail(i + 1, format!("expected 'version={ANNOTATION_VERSION}', found '{l}'"))),
        None => return Err(fail(1, "missing version header".into())),
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(fail(i + 1, format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| fail(i + 1, format!("bad number '{s}'")));
        let start_ms = sec_to_ms(num(fields[0])?).map_err(|e| fail(i + 1, e.to_string()))?;
        let stop_ms = sec_to_ms(num(fields[1])?).map_err(|e| fail(i + 1, e.to_string()))?;
        let label = fields[2].parse().map_err(|e: String| fail(i + 1, e))?;
        let confidence = num(fields[3])?;
        events.push(Event { start_ms, stop_ms, label, confidence });
    }
    let total = events.last().map_or(0, |e| e.stop_ms);
    EventList::new(events, total).map_err(|e| fail(0, e.to_string()))
}
