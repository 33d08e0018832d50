use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ictal::detector::{build_mini_resnet, save_model, MiniResNetConfig};
use ictal::pipeline::{run_streaming, PipelineConfig};
use ictal::postproc::read_annotation;
use ictal::synth::{generate, SynthConfig};
use ictal_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    unsafe {
        ictal_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

/// A trained-looking model: random weights, 32x32 input.
fn model_file(dir: &Path, zero_head: bool) -> PathBuf {
    let mut m = build_mini_resnet(&MiniResNetConfig { input_size: 32, seed: 4, ..Default::default() }).unwrap();
    if zero_head {
        m.zero_head();
    }
    let p = dir.join(if zero_head { "flat.mrsn" } else { "rand.mrsn" });
    save_model(&m, &p).unwrap();
    p
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(ictal_config_new(ptr::null_mut()), IctalStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut cfg = ptr::null_mut();
        assert_eq!(ictal_config_new(&mut cfg), IctalStatus::Ok);
        assert_eq!(ictal_config_set(cfg, cstr("s_th").as_ptr(), cstr("1.5").as_ptr()), IctalStatus::InvalidArgument);
        assert!(last_error().contains("s_th"), "{}", last_error());
        assert_eq!(ictal_config_set(cfg, cstr("bogus").as_ptr(), cstr("1").as_ptr()), IctalStatus::InvalidArgument);
        assert_eq!(ictal_config_set(cfg, ptr::null(), cstr("1").as_ptr()), IctalStatus::NullPointer);
        assert_eq!(ictal_config_set(cfg, cstr("s_th").as_ptr(), cstr("0.7").as_ptr()), IctalStatus::Ok);
        ictal_config_free(cfg);
        ictal_config_free(ptr::null_mut());

        let mut len = 0usize;
        assert_eq!(ictal_events_len(ptr::null(), &mut len), IctalStatus::NullPointer);
        let s = CStr::from_ptr(ictal_status_string(IctalStatus::Format)).to_str().unwrap();
        assert_eq!(s, "malformed file");
        assert!(!CStr::from_ptr(ictal_version()).to_bytes().is_empty());
    }
}

#[test]
fn file_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut det = ptr::null_mut();
        let missing = cstr(dir.path().join("missing.mrsn").to_str().unwrap());
        assert_eq!(ictal_detector_load(missing.as_ptr(), &mut det), IctalStatus::Io);
        assert!(det.is_null());

        let junk = dir.path().join("junk.mrsn");
        std::fs::write(&junk, b"not a model").unwrap();
        assert_eq!(ictal_detector_load(cstr(junk.to_str().unwrap()).as_ptr(), &mut det), IctalStatus::Format);

        let bad_ann = dir.path().join("bad.ann");
        std::fs::write(&bad_ann, "version=1\n0\tx\tseiz\t1\n").unwrap();
        let mut ev = ptr::null_mut();
        assert_eq!(ictal_events_read(cstr(bad_ann.to_str().unwrap()).as_ptr(), &mut ev), IctalStatus::Format);
    }
}

#[test]
fn predict_checks_image_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(model_file(dir.path(), true).to_str().unwrap());
    unsafe {
        let mut det = ptr::null_mut();
        assert_eq!(ictal_detector_load(path.as_ptr(), &mut det), IctalStatus::Ok);
        let mut side = 0usize;
        assert_eq!(ictal_detector_input_size(det, &mut side), IctalStatus::Ok);
        assert_eq!(side, 32);
        let px = vec![128u8; 32 * 32];
        let mut p = -1.0;
        assert_eq!(ictal_detector_predict(det, px.as_ptr(), 32, 32, &mut p), IctalStatus::Ok);
        assert_eq!(p, 0.5);
        assert_ne!(ictal_detector_predict(det, px.as_ptr(), 16, 64, &mut p), IctalStatus::Ok);
        ictal_detector_free(det);
    }
}

#[test]
fn stream_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = model_file(dir.path(), false);
    let s = generate(&SynthConfig { duration_sec: 90.0, n_seizures: 1, seizure_sec: (20.0, 30.0), seed: 8, ..Default::default() })
        .unwrap();
    let rec = &s.recording;
    let lib_cfg = PipelineConfig { image_size: 32, s_th: 0.3, bd_min_sec: 1.0, sd_min_sec: 2.0, ..Default::default() };
    let expected = run_streaming(&lib_cfg, &ictal::detector::load_model(&model_path).unwrap(), rec).unwrap();

    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ictal_config_new(&mut cfg), IctalStatus::Ok);
        for (k, v) in [("image_size", "32"), ("s_th", "0.3"), ("bd_min_sec", "1"), ("sd_min_sec", "2")] {
            assert_eq!(ictal_config_set(cfg, cstr(k).as_ptr(), cstr(v).as_ptr()), IctalStatus::Ok);
        }
        let mut det = ptr::null_mut();
        assert_eq!(ictal_detector_load(cstr(model_path.to_str().unwrap()).as_ptr(), &mut det), IctalStatus::Ok);

        let names: Vec<CString> = rec.channels().iter().map(|c| cstr(&c.name)).collect();
        let name_ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        let mut st = ptr::null_mut();
        let status = ictal_stream_new(cfg, det, name_ptrs.as_ptr(), name_ptrs.len(), rec.sample_rate_hz(), &mut st);
        assert_eq!(status, IctalStatus::Ok, "{}", last_error());
        ictal_config_free(cfg);
        ictal_detector_free(det);

        let mut hyp = ptr::null_mut();
        assert_eq!(ictal_stream_hypothesis(st, &mut hyp), IctalStatus::InvalidArgument);

        // interleave and push in uneven chunks, draining events as they come
        let nch = rec.channels().len();
        let mut inter = Vec::with_capacity(rec.sample_count() * nch);
        for i in 0..rec.sample_count() {
            inter.extend(rec.channels().iter().map(|c| c.samples[i]));
        }
        let mut drained = Vec::new();
        let mut drain = |st: *mut IctalStream| loop {
            let mut ev = IctalEvent { start_sec: 0.0, stop_sec: 0.0, label: IctalLabel::Background, confidence: 0.0 };
            let mut avail = 0;
            assert_eq!(ictal_stream_next_event(st, &mut ev, &mut avail), IctalStatus::Ok);
            if avail == 0 {
                break;
            }
            drained.push(ev);
        };
        let mut frame = 0;
        for (k, chunk) in [1usize, 17, 250, 999, 4096].iter().cycle().enumerate() {
            if frame >= rec.sample_count() {
                break;
            }
            let n = (*chunk).min(rec.sample_count() - frame);
            assert_eq!(ictal_stream_push(st, inter[frame * nch..].as_ptr(), n), IctalStatus::Ok, "chunk {k}");
            frame += n;
            drain(st);
        }
        assert_eq!(ictal_stream_push(st, inter.as_ptr(), 0), IctalStatus::Ok);
        assert_eq!(ictal_stream_finish(st), IctalStatus::Ok);
        drain(st);
        assert_eq!(ictal_stream_push(st, inter.as_ptr(), 1), IctalStatus::Data);

        let mut windows = 0usize;
        assert_eq!(ictal_stream_window_count(st, &mut windows), IctalStatus::Ok);
        assert_eq!(windows, expected.posteriors.len());

        assert_eq!(ictal_stream_hypothesis(st, &mut hyp), IctalStatus::Ok);
        let mut len = 0usize;
        assert_eq!(ictal_events_len(hyp, &mut len), IctalStatus::Ok);
        assert_eq!(len, expected.events.len());
        for (i, e) in expected.events.events().iter().enumerate() {
            let mut got = drained[0];
            assert_eq!(ictal_events_get(hyp, i, &mut got), IctalStatus::Ok);
            assert_eq!((got.start_sec, got.stop_sec, got.confidence), (e.start_sec(), e.stop_sec(), e.confidence));
            assert_eq!(got.label == IctalLabel::Seizure, e.label == ictal::Label::Seiz);
        }
        let mut oob = drained[0];
        assert_eq!(ictal_events_get(hyp, len, &mut oob), IctalStatus::InvalidArgument);
        // drained events are the decided prefix plus the final flush
        assert!(!drained.is_empty());
        assert_eq!(drained[0].start_sec, 0.0);
        assert!(drained.windows(2).all(|w| w[0].stop_sec == w[1].start_sec));

        let out = dir.path().join("hyp.ann");
        assert_eq!(ictal_events_write(hyp, cstr(out.to_str().unwrap()).as_ptr()), IctalStatus::Ok);
        // confidences are written with four decimals
        let written = read_annotation(&out).unwrap();
        assert_eq!(written.len(), expected.events.len());
        for (a, b) in written.events().iter().zip(expected.events.events()) {
            assert_eq!((a.start_ms, a.stop_ms, a.label), (b.start_ms, b.stop_ms, b.label));
            assert!((a.confidence - b.confidence).abs() <= 5e-5);
        }

        let mut back = ptr::null_mut();
        assert_eq!(ictal_events_read(cstr(out.to_str().unwrap()).as_ptr(), &mut back), IctalStatus::Ok);
        let mut score = std::mem::zeroed::<IctalScore>();
        assert_eq!(ictal_score_ovlp(back, hyp, &mut score), IctalStatus::Ok);
        assert_eq!(score.false_positives, 0);
        assert_eq!(score.fa_per_24h, 0.0);
        assert_eq!(ictal_score_epoch(back, hyp, 0.25, &mut score), IctalStatus::Ok);
        assert_eq!(score.false_positives + score.false_negatives, 0);
        assert_eq!(score.total_dur_sec, 90.0);

        ictal_events_free(back);
        ictal_events_free(hyp);
        ictal_stream_free(st);
    }
}

#[test]
fn stream_rejects_mismatched_model() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = cstr(model_file(dir.path(), true).to_str().unwrap());
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ictal_config_new(&mut cfg), IctalStatus::Ok);
        let mut det = ptr::null_mut();
        assert_eq!(ictal_detector_load(model_path.as_ptr(), &mut det), IctalStatus::Ok);
        let name = cstr("Fp1");
        let names = [name.as_ptr()];
        let mut st = ptr::null_mut();
        // default image_size 256 vs a 32x32 model
        assert_eq!(ictal_stream_new(cfg, det, names.as_ptr(), 1, 250.0, &mut st), IctalStatus::InvalidArgument);
        assert!(last_error().contains("32"), "{}", last_error());
        assert!(st.is_null());
        ictal_config_free(cfg);
        ictal_detector_free(det);
    }
}

/// Compiles `tests/c/smoke.c` against the generated header and the static
/// library, then runs it.
#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libictal_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-D_GNU_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("run C compiler");
    assert!(out.status.success(), "cc failed: {}", String::from_utf8_lossy(&out.stderr));

    let model = model_file(dir.path(), true);
    let run = Command::new(&bin).arg(&model).output().unwrap();
    assert!(
        run.status.success(),
        "smoke failed: {}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("windows="));
}
