//! Brute-force reference implementations shared by the integration tests
//! and the acceptance harness. They work on dense label arrays and never
//! call the library's event-list algorithms.
#![allow(dead_code)]

pub mod checks;

use ictal::postproc::EventList;
use ictal::Label;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Resolution of the dense label arrays.
pub const CELL_MS: u64 = 10;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense seizure flags of an event list, one per 10 ms cell.
pub fn cells_of(ev: &EventList) -> Vec<bool> {
    let mut out = Vec::new();
    for e in ev.events() {
        assert_eq!(e.start_ms % CELL_MS, 0);
        assert_eq!(e.stop_ms % CELL_MS, 0);
        let n = ((e.stop_ms - e.start_ms) / CELL_MS) as usize;
        out.extend(std::iter::repeat_n(e.label == Label::Seiz, n));
    }
    out
}

/// `(start, len, value)` for each maximal run.
pub fn runs(cells: &[bool]) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let mut j = i;
        while j < cells.len() && cells[j] == cells[i] {
            j += 1;
        }
        out.push((i, j - i, cells[i]));
        i = j;
    }
    out
}

/// threshold -> gap fill -> short seizure removal on 10 ms cells.
pub fn morphology_oracle(p_seiz: &[f64], stride_ms: u64, s_th: f64, bd_sec: f64, sd_sec: f64) -> Vec<bool> {
    assert_eq!(stride_ms % CELL_MS, 0);
    let per = (stride_ms / CELL_MS) as usize;
    let mut cells = Vec::new();
    for &p in p_seiz {
        cells.extend(std::iter::repeat_n(p >= s_th, per));
    }
    let dur_ms = |len: usize| (len as u64 * CELL_MS) as f64;
    let mut filled = cells.clone();
    for (start, len, seiz) in runs(&cells) {
        let interior = start > 0 && start + len < cells.len();
        if !seiz && interior && dur_ms(len) < (bd_sec * 1000.0).round() {
            filled[start..start + len].iter_mut().for_each(|c| *c = true);
        }
    }
    let mut out = filled.clone();
    for (start, len, seiz) in runs(&filled) {
        if seiz && dur_ms(len) < (sd_sec * 1000.0).round() {
            out[start..start + len].iter_mut().for_each(|c| *c = false);
        }
    }
    out
}

/// Posteriors with seizure-like bursts, isolated spikes and noise.
pub fn random_posteriors(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(len);
    let mut level: f64 = r.random_range(0.0..1.0);
    for _ in 0..len {
        if r.random_bool(0.15) {
            level = r.random_range(0.0..1.0);
        }
        let v: f64 = level + r.random_range(-0.2..0.2);
        p.push(v.clamp(0.0, 1.0));
    }
    p
}

/// Random reference-style list on a 10 ms grid.
pub fn random_event_list(r: &mut ChaCha8Rng, total_cells: usize, mean_run_cells: usize) -> EventList {
    random_event_list_on_grid(r, total_cells, mean_run_cells, CELL_MS)
}

/// Random reference-style list whose boundaries fall on multiples of `unit_ms`.
pub fn random_event_list_on_grid(r: &mut ChaCha8Rng, total_cells: usize, mean_run_cells: usize, unit_ms: u64) -> EventList {
    let mut seizures = Vec::new();
    let mut at = 0;
    let mut seiz = r.random_bool(0.5);
    while at < total_cells {
        let len = r.random_range(1..=2 * mean_run_cells).min(total_cells - at);
        if seiz {
            seizures.push((at as u64 * unit_ms, (at + len) as u64 * unit_ms));
        }
        at += len;
        seiz = !seiz;
    }
    EventList::from_seizures(&seizures, total_cells as u64 * unit_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Event-level any-overlap counts by pairwise enumeration over cells.
pub fn ovlp_oracle(r: &[bool], h: &[bool]) -> (Counts, f64) {
    let rr = runs(r);
    let hr = runs(h);
    let overlaps = |a: (usize, usize, bool), other: &[bool]| other[a.0..a.0 + a.1].iter().any(|&c| c);
    let tp = rr.iter().filter(|x| x.2 && overlaps(**x, h)).count();
    let fn_ = rr.iter().filter(|x| x.2 && !overlaps(**x, h)).count();
    let fp = hr.iter().filter(|x| x.2 && !overlaps(**x, r)).count();
    let tn = rr.iter().filter(|x| !x.2 && !overlaps(**x, h)).count();
    let bckg = r.iter().filter(|&&c| !c).count();
    let clean = r.iter().zip(h).filter(|(&a, &b)| !a && !b).count();
    let spec = if bckg == 0 { f64::NAN } else { clean as f64 / bckg as f64 * 100.0 };
    (Counts { tp, fp, fn_, tn }, spec)
}

/// Majority-duration label per epoch (ties to seizure), partial last epoch
/// included.
pub fn epoch_labels(cells: &[bool], epoch_cells: usize) -> Vec<bool> {
    cells
        .chunks(epoch_cells)
        .map(|c| {
            let s = c.iter().filter(|&&x| x).count();
            2 * s >= c.len()
        })
        .collect()
}

pub fn epoch_oracle(r: &[bool], h: &[bool], epoch_cells: usize) -> Counts {
    let (re, he) = (epoch_labels(r, epoch_cells), epoch_labels(h, epoch_cells));
    let mut c = Counts { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (a, b) in re.iter().zip(&he) {
        match (a, b) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}
