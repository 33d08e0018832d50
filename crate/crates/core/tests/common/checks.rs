//! Property checks that the per-module tests assert on and the acceptance
//! harness reports. Each returns a short summary on success and the first
//! violation otherwise.

use ictal::detector::layers::Tensor;
use ictal::detector::*;
use ictal::postproc::*;
use ictal::scoring::*;
use ictal::windowing::{max_local_scale, ScalingParams};
use ictal::Label;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;

pub type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// `max_local_scale(k x) == max_local_scale(x)` for gains across six
/// decades, on random signals whose local maxima stay well above epsilon.
pub fn scaling_law(cases: usize) -> Check {
    let mut r = rng(100);
    let params = ScalingParams::default();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let len = r.random_range(1..1500);
        let amp = 10f64.powf(r.random_range(-2.0..3.0));
        let normal = Normal::new(0.0, amp).unwrap();
        let mut x: Vec<f64> = (0..len).map(|_| normal.sample(&mut r)).collect();
        if case % 5 == 0 {
            // bursts and a DC offset on top of the noise
            let off = normal.sample(&mut r);
            for (i, v) in x.iter_mut().enumerate() {
                *v += off + if (i / 97) % 3 == 0 { 20.0 * amp * (i as f64 * 0.37).sin() } else { 0.0 };
            }
        }
        let base = max_local_scale(&x, 50.0, &params);
        ensure!(base.iter().all(|v| (-1.0..=1.0).contains(v)), "case {case}: output outside [-1, 1]");
        for k in [1e-3, 1.0, 1e3] {
            let kx: Vec<f64> = x.iter().map(|v| k * v).collect();
            let y = max_local_scale(&kx, 50.0, &params);
            ensure!(y.iter().all(|v| (-1.0..=1.0).contains(v)), "case {case}, k={k}: output outside [-1, 1]");
            for (a, b) in y.iter().zip(&base) {
                worst = worst.max((a - b).abs());
            }
            ensure!(worst <= 1e-9, "case {case}, k={k}: deviation {worst:e}");
        }
    }
    Ok(format!("{cases} signals x 3 gains, max deviation {worst:.1e}"))
}

/// Class weights and weighted loss against scalar arithmetic written out
/// here, plus the equal-weight identity.
pub fn loss_oracle(cases: usize) -> Check {
    let mut r = rng(200);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let n_seiz = r.random_range(0..1_000_000usize);
        let n_bckg = r.random_range(usize::from(n_seiz == 0)..1_000_000usize);
        let w = class_weights(&TrainSetStats::new(n_seiz, n_bckg)).map_err(|e| e.to_string())?;
        let total = (n_seiz + n_bckg) as f64;
        let (ob, os) = (n_seiz as f64 / total, n_bckg as f64 / total);
        worst = worst.max((w.w_bckg - ob).abs()).max((w.w_seiz - os).abs());

        let p_seiz: f64 = if case % 50 == 0 { [0.0, 1.0, 1e-300][case / 50 % 3] } else { r.random_range(0.0..=1.0) };
        let p = [1.0 - p_seiz, p_seiz];
        let label = if r.random_bool(0.5) { Label::Seiz } else { Label::Bckg };
        let (wl, pl) = match label {
            Label::Bckg => (ob, p[0]),
            Label::Seiz => (os, p[1]),
        };
        let expect = wl * -(if pl < 1e-12 { 1e-12f64 } else { pl }).ln();
        let got = weighted_loss(p, label, &w);
        let err = (got - expect).abs() / expect.abs().max(1.0);
        worst = worst.max(err);
        ensure!(worst <= 1e-9, "case {case}: n=({n_seiz},{n_bckg}) p={p_seiz} {label}: {got} vs {expect}");

        if pl >= 1e-12 {
            let ce = -pl.ln();
            let eq = weighted_loss(p, label, &ClassWeights::EQUAL);
            ensure!(eq == 0.5 * ce, "case {case}: equal-weight loss {eq} != 0.5 x {ce}");
        }
    }
    Ok(format!("{cases} cases, max error {worst:.1e}; equal weights give exactly 0.5 x cross-entropy"))
}

pub fn tiny_net() -> MiniResNetConfig {
    MiniResNetConfig {
        input_size: 48,
        stem_channels: 3,
        stem_kernel: 5,
        stem_stride: 2,
        layer_widths: [3, 4, 5, 6],
        num_classes: 2,
        seed: 17,
    }
}

pub fn random_input(n: usize, size: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor::zeros(n, 1, size, size);
    t.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    t
}

fn loss_of(model: &mut MiniResNet, x: &Tensor, labels: &[Label], w: &ClassWeights, form: LossForm) -> (f64, Vec<ProbPair>) {
    let logits = model.forward_train(x.clone());
    let probs: Vec<ProbPair> = logits.chunks_exact(2).map(softmax2).collect();
    (batch_weighted_loss(&probs, labels, w, form), probs)
}

/// Backprop against central differences with step 1e-4, tensor by tensor:
/// `|g - fd| / max(|g|, |fd|)` over L2 norms. Entries whose +h and -h
/// evaluations fall in different ReLU/max-pool regions are excluded, since
/// the difference quotient is not an estimate of the derivative there; at
/// most 5% may be excluded.
pub fn gradient_check(form: LossForm) -> Check {
    let cfg = tiny_net();
    let mut model = build_mini_resnet(&cfg).map_err(|e| e.to_string())?;
    let n_params = model.param_count();
    ensure!(n_params <= 50_000, "{n_params} parameters");
    let x = random_input(3, cfg.input_size, 5);
    let labels = [Label::Seiz, Label::Bckg, Label::Seiz];
    let w = ClassWeights { w_bckg: 0.3, w_seiz: 0.7 };

    model.zero_grad();
    let (_, probs) = loss_of(&mut model, &x, &labels, &w, form);
    let base_sig = model.activation_signature();
    model.backward(&loss_logit_grad(&probs, &labels, &w, form));
    let mut analytic = Vec::new();
    model.for_each_param(&mut |p| analytic.push(p.grad.clone()));

    let h = 1e-4;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
    for (t, grads) in analytic.iter().enumerate() {
        let (mut a, mut n) = (Vec::new(), Vec::new());
        for (i, &g) in grads.iter().enumerate() {
            let mut eval = |delta: f64| {
                let mut k = 0;
                model.for_each_param(&mut |p| {
                    if k == t {
                        p.value[i] += delta;
                    }
                    k += 1;
                });
                let loss = loss_of(&mut model, &x, &labels, &w, form).0;
                (loss, model.activation_signature())
            };
            let (plus, sig_p) = eval(h);
            let (minus, sig_m) = eval(-2.0 * h);
            eval(h);
            if sig_p != base_sig || sig_m != base_sig {
                skipped += 1;
                continue;
            }
            a.push(g);
            n.push((plus - minus) / (2.0 * h));
        }
        ensure!(!a.is_empty(), "tensor {t}: every entry straddles a kink");
        checked += a.len();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(&n).map(|(a, b)| a - b).collect();
        let scale = norm(&a).max(norm(&n));
        let rel = if scale < 1e-12 { 0.0 } else { norm(&diff) / scale };
        ensure!(rel < 1e-3, "tensor {t}: relative error {rel:e}");
        worst = worst.max(rel);
    }
    ensure!(skipped * 20 < checked, "{skipped} of {checked} entries straddle a kink");
    Ok(format!(
        "{n_params} parameters in {} tensors, max relative error {worst:.1e} ({skipped} kink-straddling entries skipped)",
        analytic.len()
    ))
}

/// With every block convolution zeroed (and fresh batch norm), each block
/// outputs exactly its shortcut path.
pub fn residual_wiring() -> Check {
    let cfg = MiniResNetConfig { input_size: 64, seed: 3, ..Default::default() };
    let mut model = build_mini_resnet(&cfg).map_err(|e| e.to_string())?;
    for b in model.blocks_mut() {
        b.zero_conv_weights();
    }
    let mut h = model.stem_infer(&random_input(2, 64, 2));
    let mut worst = 0.0f64;
    let mut projections = 0;
    for (i, b) in model.blocks().iter().enumerate() {
        let out = b.infer(&h);
        let expect = b.shortcut_infer(&h);
        ensure!(out.data.len() == expect.data.len(), "block {i}: shape mismatch");
        let err = out.data.iter().zip(&expect.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(err < 1e-6, "block {i}: error {err:e}");
        worst = worst.max(err);
        projections += usize::from(b.has_projection());
        h = out;
    }
    Ok(format!("{} blocks ({projections} with projection shortcut), max error {worst:.1e}", model.blocks().len()))
}

pub fn check_guarantees(ev: &EventList, p: &PostprocParams) -> std::result::Result<(), String> {
    let evs = ev.events();
    for (i, e) in evs.iter().enumerate() {
        ensure!(i == 0 || evs[i - 1].label != e.label, "event {i}: runs are not maximal");
        match e.label {
            Label::Seiz => ensure!(e.duration_sec() >= p.sd_min_sec - 1e-9, "seizure {i} shorter than sd_min"),
            Label::Bckg if i > 0 && i + 1 < evs.len() => {
                ensure!(e.duration_sec() >= p.bd_min_sec - 1e-9, "inter-seizure gap {i} shorter than bd_min")
            }
            Label::Bckg => {}
        }
    }
    Ok(())
}

/// The shared stream corpus for the postprocessing checks: `streams` random
/// posterior sequences crossed with 20 random parameter triples.
fn postproc_corpus(streams: usize) -> (Vec<(u64, Vec<f64>)>, Vec<PostprocParams>) {
    let mut r = rng(1);
    let params = (0..20)
        .map(|_| PostprocParams::new(r.random_range(0.0..=1.0), r.random_range(0.0..12.0), r.random_range(0.0..12.0)).unwrap())
        .collect();
    let data = (0..streams)
        .map(|case| {
            let stride_ms = [250u64, 500, 1000, 2000][case % 4];
            let len = r.random_range(0..120);
            (stride_ms, random_posteriors(&mut r, len))
        })
        .collect();
    (data, params)
}

pub fn postproc_differential(streams: usize) -> Check {
    let (data, params) = postproc_corpus(streams);
    for (case, (stride_ms, probs)) in data.iter().enumerate() {
        let post = PosteriorSequence::from_probs(*stride_ms as f64 / 1000.0, probs).map_err(|e| e.to_string())?;
        for (k, p) in params.iter().enumerate() {
            let ev = postprocess(&post, p).map_err(|e| e.to_string())?;
            let oracle = morphology_oracle(probs, *stride_ms, p.s_th, p.bd_min_sec, p.sd_min_sec);
            ensure!(cells_of(&ev) == oracle, "stream {case}, params {k}: differs from the cell oracle");
            check_guarantees(&ev, p).map_err(|e| format!("stream {case}, params {k}: {e}"))?;
        }
    }
    Ok(format!("{} streams x {} parameter triples equal the 10 ms oracle", data.len(), params.len()))
}

pub fn streaming_equivalence(streams: usize) -> Check {
    let (data, params) = postproc_corpus(streams);
    let mut worst_margin = f64::INFINITY;
    let mut worst_lag = 0.0f64;
    for (case, (stride_ms, probs)) in data.iter().enumerate() {
        let post = PosteriorSequence::from_probs(*stride_ms as f64 / 1000.0, probs).map_err(|e| e.to_string())?;
        for (k, p) in params.iter().enumerate() {
            let offline = postprocess(&post, p).map_err(|e| e.to_string())?;
            let (streamed, lag) = StreamingPostprocessor::process(&post, p).map_err(|e| e.to_string())?;
            ensure!(streamed == offline, "stream {case}, params {k}: streaming output differs");
            let bound = detection_delay(p) + post.stride_sec();
            ensure!(lag <= bound + 1e-9, "stream {case}, params {k}: lag {lag} > bound {bound}");
            worst_margin = worst_margin.min(bound - lag);
            worst_lag = worst_lag.max(lag);
        }
    }
    Ok(format!("{} runs equal offline; worst lag {worst_lag:.2} s, tightest margin to bound {worst_margin:.2} s", data.len() * params.len()))
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64 * 100.0)
}

pub fn scoring_identity(refs: usize) -> Check {
    let mut r = rng(10);
    let mut checked = 0;
    while checked < refs {
        let n = r.random_range(2..300);
        let reference = random_event_list_on_grid(&mut r, n, 20, 1000);
        if reference.seizures().count() == 0 || reference.seizures().count() == reference.len() {
            continue;
        }
        let ovlp = score_ovlp(&reference, &reference).map_err(|e| e.to_string())?;
        let epoch = score_epoch(&reference, &reference, 1.0).map_err(|e| e.to_string())?;
        for s in [ovlp, epoch] {
            ensure!(
                s.sensitivity_pct == Some(100.0) && s.specificity_pct == Some(100.0) && s.fa_per_24h == 0.0,
                "reference {checked}: {s:?}"
            );
        }
        checked += 1;
    }
    Ok(format!("{refs} references score 100/100/0 on both metrics"))
}

pub fn scoring_oracles(pairs: usize) -> Check {
    let mut r = rng(11);
    for case in 0..pairs {
        let n = r.random_range(1..4000);
        let (m1, m2) = (r.random_range(5..400), r.random_range(5..400));
        let reference = random_event_list(&mut r, n, m1);
        let hyp = random_event_list(&mut r, n, m2);
        let (rc, hc) = (cells_of(&reference), cells_of(&hyp));

        let s = score_ovlp(&reference, &hyp).map_err(|e| e.to_string())?;
        let (o, spec) = ovlp_oracle(&rc, &hc);
        ensure!((s.tp, s.fp, s.fn_, s.tn) == (o.tp, o.fp, o.fn_, o.tn), "ovlp case {case}: {s:?} vs {o:?}");
        ensure!(s.sensitivity_pct == pct(o.tp, o.tp + o.fn_), "ovlp case {case}: sensitivity");
        match s.specificity_pct {
            Some(v) => ensure!((v - spec).abs() < 1e-9, "ovlp case {case}: specificity {v} vs {spec}"),
            None => ensure!(spec.is_nan(), "ovlp case {case}: specificity undefined"),
        }
        ensure!(s.fa_per_24h == o.fp as f64 * 86400.0 / reference.total_sec(), "ovlp case {case}: FA rate");

        let epoch_sec = [0.5, 1.0, 2.5][case % 3];
        let e = score_epoch(&reference, &hyp, epoch_sec).map_err(|e| e.to_string())?;
        let ec = (epoch_sec * 100.0) as usize;
        let oe = epoch_oracle(&rc, &hc, ec);
        ensure!((e.tp, e.fp, e.fn_, e.tn) == (oe.tp, oe.fp, oe.fn_, oe.tn), "epoch case {case}: {e:?} vs {oe:?}");
        ensure!(e.sensitivity_pct == pct(oe.tp, oe.tp + oe.fn_), "epoch case {case}: sensitivity");
        ensure!(e.specificity_pct == pct(oe.tn, oe.tn + oe.fp), "epoch case {case}: specificity");

        let m = confusion_matrix(&reference, &hyp, epoch_sec).map_err(|e| e.to_string())?;
        ensure!(m.counts == [[e.tn, e.fp], [e.fn_, e.tp]], "epoch case {case}: confusion counts");
        for row in m.percent.iter().flatten() {
            ensure!((row[0] + row[1] - 100.0).abs() < 0.01, "epoch case {case}: confusion row sums to {}", row[0] + row[1]);
        }
    }
    Ok(format!("{pairs} random pairs match both enumeration oracles"))
}
