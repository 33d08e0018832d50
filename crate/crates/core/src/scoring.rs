//! OVLP (any-overlap event) and EPOCH (fixed-slice) scoring of hypothesis
//! annotations against a reference, plus delay sweeps.

use std::fmt::Write as _;

use crate::detector::PosteriorSequence;
use crate::postproc::{detection_delay, postprocess, sec_to_ms, Event, EventList, PostprocError, PostprocParams};
use crate::Label;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("reference covers {ref_sec} s but hypothesis covers {hyp_sec} s")]
    DurationMismatch { ref_sec: f64, hyp_sec: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
}

pub type Result<T, E = ScoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ovlp,
    Epoch,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ovlp => "ovlp",
            Metric::Epoch => "epoch",
        }
    }
}

/// Percentages are `None` when undefined (no reference seizures for
/// sensitivity, no reference background for specificity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub metric: Metric,
    pub sensitivity_pct: Option<f64>,
    pub specificity_pct: Option<f64>,
    pub fa_per_24h: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub total_dur_sec: f64,
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64 * 100.0)
}

fn check_durations(r: &EventList, h: &EventList) -> Result<()> {
    if r.total_ms() != h.total_ms() {
        return Err(ScoreError::DurationMismatch { ref_sec: r.total_sec(), hyp_sec: h.total_sec() });
    }
    if r.total_ms() == 0 {
        return Err(ScoreError::InvalidParam("nothing to score: zero duration".into()));
    }
    Ok(())
}

fn fa_rate(fp: usize, total_ms: u64) -> f64 {
    fp as f64 * SECONDS_PER_DAY / (total_ms as f64 / 1000.0)
}

/// Calls `f(i, j)` for every pair `a[i]`, `b[j]` with positive overlap.
fn for_each_overlap(a: &[Event], b: &[Event], mut f: impl FnMut(usize, usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].overlap_ms(&b[j]) > 0 {
            f(i, j);
        }
        if a[i].stop_ms <= b[j].stop_ms {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Any-overlap event scoring. A reference seizure overlapped by some
/// hypothesis seizure is a TP, otherwise a FN; a hypothesis seizure touching
/// no reference seizure is a FP; a reference background event touched by no
/// hypothesis seizure is a TN. Specificity is the fraction of reference
/// background time not covered by hypothesis seizures.
pub fn score_ovlp(reference: &EventList, hyp: &EventList) -> Result<ScoreReport> {
    check_durations(reference, hyp)?;
    let (r, h) = (reference.events(), hyp.events());
    let mut ref_hit = vec![false; r.len()];
    let mut hyp_hit = vec![false; h.len()];
    let mut covered_bckg_ms = 0;
    for_each_overlap(r, h, |i, j| {
        if h[j].label != Label::Seiz {
            return;
        }
        ref_hit[i] = true;
        match r[i].label {
            Label::Seiz => hyp_hit[j] = true,
            Label::Bckg => covered_bckg_ms += r[i].overlap_ms(&h[j]),
        }
    });
    let count = |label: Label, hit: bool| r.iter().zip(&ref_hit).filter(|(e, &x)| e.label == label && x == hit).count();
    let (tp, fn_, tn) = (count(Label::Seiz, true), count(Label::Seiz, false), count(Label::Bckg, false));
    let fp = h.iter().zip(&hyp_hit).filter(|(e, &x)| e.label == Label::Seiz && !x).count();
    let bckg_ms: u64 = r.iter().filter(|e| e.label == Label::Bckg).map(Event::duration_ms).sum();
    Ok(ScoreReport {
        metric: Metric::Ovlp,
        sensitivity_pct: pct(tp as u64, (tp + fn_) as u64),
        specificity_pct: pct(bckg_ms - covered_bckg_ms, bckg_ms),
        fa_per_24h: fa_rate(fp, reference.total_ms()),
        tp,
        fp,
        fn_,
        tn,
        total_dur_sec: reference.total_sec(),
    })
}

/// Majority-duration label of each epoch; the last epoch may be partial and
/// an exact tie counts as seizure.
pub fn epoch_labels(ev: &EventList, epoch_ms: u64) -> Vec<Label> {
    let total = ev.total_ms();
    let mut out = Vec::with_capacity(total.div_ceil(epoch_ms.max(1)) as usize);
    let events = ev.events();
    let mut k = 0;
    let mut start = 0;
    while start < total {
        let stop = (start + epoch_ms).min(total);
        let slice = Event { start_ms: start, stop_ms: stop, label: Label::Seiz, confidence: 0.0 };
        while k < events.len() && events[k].stop_ms <= start {
            k += 1;
        }
        let mut seiz = 0;
        let mut m = k;
        while m < events.len() && events[m].start_ms < stop {
            if events[m].label == Label::Seiz {
                seiz += events[m].overlap_ms(&slice);
            }
            m += 1;
        }
        out.push(if 2 * seiz >= stop - start { Label::Seiz } else { Label::Bckg });
        start = stop;
    }
    out
}

fn epoch_ms_of(epoch_sec: f64) -> Result<u64> {
    let ms = sec_to_ms(epoch_sec).map_err(|e| ScoreError::InvalidParam(e.to_string()))?;
    if ms == 0 {
        return Err(ScoreError::InvalidParam(format!("epoch length {epoch_sec} s must be at least 1 ms")));
    }
    Ok(ms)
}

/// `[[bckg->bckg, bckg->seiz], [seiz->bckg, seiz->seiz]]` epoch counts.
fn epoch_counts(reference: &EventList, hyp: &EventList, epoch_sec: f64) -> Result<[[usize; 2]; 2]> {
    check_durations(reference, hyp)?;
    let ms = epoch_ms_of(epoch_sec)?;
    let mut c = [[0usize; 2]; 2];
    for (r, h) in epoch_labels(reference, ms).into_iter().zip(epoch_labels(hyp, ms)) {
        c[r.index()][h.index()] += 1;
    }
    Ok(c)
}

pub fn score_epoch(reference: &EventList, hyp: &EventList, epoch_sec: f64) -> Result<ScoreReport> {
    let c = epoch_counts(reference, hyp, epoch_sec)?;
    let (tn, fp, fn_, tp) = (c[0][0], c[0][1], c[1][0], c[1][1]);
    Ok(ScoreReport {
        metric: Metric::Epoch,
        sensitivity_pct: pct(tp as u64, (tp + fn_) as u64),
        specificity_pct: pct(tn as u64, (tn + fp) as u64),
        fa_per_24h: fa_rate(fp, reference.total_ms()),
        tp,
        fp,
        fn_,
        tn,
        total_dur_sec: reference.total_sec(),
    })
}

/// Rows are the reference label, columns the hypothesis label, both indexed
/// by [`Label::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
    /// Row-normalised percentages; `None` for a row with no epochs.
    pub percent: [Option<[f64; 2]>; 2],
}

pub fn confusion_matrix(reference: &EventList, hyp: &EventList, epoch_sec: f64) -> Result<ConfusionMatrix> {
    let counts = epoch_counts(reference, hyp, epoch_sec)?;
    let row = |r: [usize; 2]| {
        let n = r[0] + r[1];
        (n > 0).then(|| [r[0] as f64 / n as f64 * 100.0, r[1] as f64 / n as f64 * 100.0])
    };
    Ok(ConfusionMatrix { counts, percent: [row(counts[0]), row(counts[1])] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delay_sec: f64,
    pub bd_min_sec: f64,
    pub sd_min_sec: f64,
    pub sensitivity_pct: Option<f64>,
    pub fa_per_24h: f64,
}

/// Postprocesses `post` at every `(bd_min, sd_min)` grid point and scores it
/// with OVLP. The hypothesis is extended to the reference duration. Rows
/// are stably sorted by delay.
pub fn sweep_delay(post: &PosteriorSequence, reference: &EventList, s_th: f64, grid: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(ScoreError::InvalidParam("empty sweep grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &(bd, sd) in grid {
        let p = PostprocParams::new(s_th, bd, sd)?;
        let hyp = postprocess(post, &p)?;
        let hyp = if hyp.total_ms() < reference.total_ms() { hyp.extend_to(reference.total_ms())? } else { hyp };
        let s = score_ovlp(reference, &hyp)?;
        rows.push(SweepRow {
            delay_sec: detection_delay(&p),
            bd_min_sec: bd,
            sd_min_sec: sd,
            sensitivity_pct: s.sensitivity_pct,
            fa_per_24h: s.fa_per_24h,
        });
    }
    rows.sort_by(|a, b| a.delay_sec.total_cmp(&b.delay_sec));
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.4}"))
}

/// One row per report, header
/// `metric,sensitivity_pct,specificity_pct,fa_per_24h,tp,fp,fn,tn,total_dur_sec`.
pub fn report_csv(reports: &[ScoreReport]) -> String {
    let mut out = String::from("metric,sensitivity_pct,specificity_pct,fa_per_24h,tp,fp,fn,tn,total_dur_sec\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{},{},{},{},{:.3}",
            r.metric.as_str(),
            opt(r.sensitivity_pct),
            opt(r.specificity_pct),
            r.fa_per_24h,
            r.tp,
            r.fp,
            r.fn_,
            r.tn,
            r.total_dur_sec
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delay_sec,sensitivity_pct,fa_per_24h\n");
    for r in rows {
        let _ = writeln!(out, "{:.3},{},{:.4}", r.delay_sec, opt(r.sensitivity_pct), r.fa_per_24h);
    }
    out
}

/// Confusion matrix as CSV with `actual,bckg_pct,seiz_pct` rows.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("actual,bckg_pct,seiz_pct\n");
    for (label, row) in [(Label::Bckg, m.percent[0]), (Label::Seiz, m.percent[1])] {
        let (a, b) = row.map_or((None, None), |r| (Some(r[0]), Some(r[1])));
        let _ = writeln!(out, "{label},{},{}", opt(a), opt(b));
    }
    out
}
