mod common;

use common::*;
use ictal::detector::PosteriorSequence;
use ictal::postproc::*;
use proptest::prelude::*;
use rand::RngExt;

#[test]
fn randomized_differential_against_cell_oracle() {
    checks::postproc_differential(200).unwrap();
}

#[test]
fn streaming_matches_offline_within_lag_bound() {
    checks::streaming_equivalence(200).unwrap();
}

#[test]
fn lag_bound_is_attained_for_an_unconfirmed_group() {
    // a seizure run just short of sd_min followed by a gap of bd_min
    let p = PostprocParams::new(0.5, 3.0, 4.0).unwrap();
    let probs = [0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1];
    let post = PosteriorSequence::from_probs(1.0, &probs).unwrap();
    let (_, lag) = StreamingPostprocessor::process(&post, &p).unwrap();
    assert_eq!(lag, 6.0);
    assert!(lag <= detection_delay(&p) + 1.0);
}

#[test]
fn idempotent_on_induced_labels() {
    let mut r = rng(2);
    for _ in 0..200 {
        let probs = random_posteriors(&mut r, 80);
        let post = PosteriorSequence::from_probs(1.0, &probs).unwrap();
        let p = PostprocParams::new(0.5, r.random_range(0.0..6.0), r.random_range(0.0..6.0)).unwrap();
        let once = postprocess(&post, &p).unwrap();
        let induced: Vec<f64> = cells_of(&once).chunks(100).map(|c| if c[0] { 1.0 } else { 0.0 }).collect();
        let again = postprocess(&PosteriorSequence::from_probs(1.0, &induced).unwrap(), &p).unwrap();
        assert_eq!(cells_of(&again), cells_of(&once));
    }
}

proptest! {
    #[test]
    fn morphology_never_adds_events(
        probs in prop::collection::vec(0.0f64..=1.0, 0..60),
        bd in 0.0f64..8.0,
        sd in 0.0f64..8.0,
    ) {
        let post = PosteriorSequence::from_probs(1.0, &probs).unwrap();
        let t = threshold(&post, 0.5).unwrap();
        let f = fill_background_gaps(&t, bd).unwrap();
        prop_assert!(f.len() <= t.len());
        let s = remove_short_seizures(&f, sd).unwrap();
        prop_assert!(s.seizures().count() <= f.seizures().count());
    }

    #[test]
    fn zero_parameters_are_identity(probs in prop::collection::vec(0.0f64..=1.0, 1..60)) {
        let post = PosteriorSequence::from_probs(0.5, &probs).unwrap();
        let t = threshold(&post, 0.4).unwrap();
        prop_assert_eq!(&fill_background_gaps(&t, 0.0).unwrap(), &t);
        prop_assert_eq!(&remove_short_seizures(&t, 0.0).unwrap(), &t);
    }
}

#[test]
fn annotation_file_round_trip() {
    let post = PosteriorSequence::from_probs(1.0, &[0.1, 0.9, 0.95, 0.2, 0.3]).unwrap();
    let ev = postprocess(&post, &PostprocParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.ann");
    write_annotation(&ev, &path).unwrap();
    let back = read_annotation(&path).unwrap();
    assert_eq!(cells_of(&back), cells_of(&ev));
}
