use std::path::Path;

use proptest::prelude::*;

use bb_core::ingest::{read_dataset_dir, write_dataset_dir};
use bb_core::metrics::{courtesy_lc_table, highway_lc_curve, pass_first_curve, ModelSource, Naturalistic};
use bb_core::pipeline::{extract, Scenario};
use bb_core::synth::{
    constant_velocity_predict, generate_dataset, generate_highway_dataset, generate_merge_dataset,
    ground_truth_predictions, offset_predictions, SynthParams,
};
use bb_core::{AnalysisConfig, Point, VehicleId};

fn params(n_events: usize, n_highway: usize, seed: u64) -> SynthParams {
    SynthParams {
        n_events,
        n_highway,
        seed,
        ..SynthParams::default()
    }
}

#[test]
fn step_generator_gives_step_curve() {
    let p = SynthParams {
        pass_first_logistic_scale: 0.0,
        ..params(400, 0, 2)
    };
    let (d, _) = generate_merge_dataset(&p).unwrap();
    let cfg = AnalysisConfig::default();
    let ex = extract(&d, &cfg);
    let r = pass_first_curve(&ex.events, 5.0, &Naturalistic::new(&d), &d, &cfg).unwrap();
    for b in r.curve.bins.iter().filter(|b| !b.masked) {
        let want = if b.lo >= 0.0 { 1.0 } else { 0.0 };
        assert_eq!(b.value, Some(want), "bin [{}, {})", b.lo, b.hi);
    }
}

#[test]
fn courtesy_rates_match_generator() {
    let p = SynthParams {
        courtesy_p_conflict: 0.6,
        courtesy_p_noconflict: 0.05,
        ..params(4000, 0, 9)
    };
    let (d, labels) = generate_merge_dataset(&p).unwrap();
    let cfg = AnalysisConfig::default();
    let ex = extract(&d, &cfg);
    let r = courtesy_lc_table(&ex.events, 5.0, &Naturalistic::new(&d), &d, &cfg);
    assert_eq!(r.table.total() as usize, labels.len());
    assert!((r.table.conflict_rate().unwrap() - 0.6).abs() < 0.05);
    assert!((r.table.no_conflict_rate().unwrap() - 0.05).abs() < 0.05);
    assert!(r.p_value < 1e-6);
    // Conflict labels agree with the extracted lead times.
    let conflicts = labels.iter().filter(|l| l.conflict).count() as u64;
    assert_eq!(r.table.a + r.table.b, conflicts);
}

#[test]
fn highway_curve_is_a_step_on_ttc() {
    let (d, labels) = generate_highway_dataset(&params(0, 600, 4)).unwrap();
    let cfg = AnalysisConfig::default();
    let ex = extract(&d, &cfg);
    assert_eq!(ex.anchors.len(), labels.len());
    for a in &ex.anchors {
        let l = labels.iter().find(|l| l.ego_id == a.vehicle_id).unwrap();
        assert!((a.ttc - l.true_ttc).abs() < 1e-6, "{} vs {}", a.ttc, l.true_ttc);
    }
    let r = highway_lc_curve(&ex.anchors, 5.0, &Naturalistic::new(&d), &d, &cfg);
    for b in r.curve.bins.iter().filter(|b| !b.masked) {
        let want = if b.lo >= 0.0 && b.hi <= 3.0 { 1.0 } else { 0.0 };
        assert_eq!(b.value, Some(want), "bin [{}, {})", b.lo, b.hi);
    }
}

#[test]
fn conditions_identical_across_sources() {
    let (d, _) = generate_dataset(&params(200, 200, 12)).unwrap();
    let cfg = AnalysisConfig::default();
    let ex = extract(&d, &cfg);
    let anchors = ex.request_anchors(Scenario::All);
    // Any complete prediction set: here a biased copy of the truth.
    let preds = offset_predictions(&ground_truth_predictions(&d, &anchors), 0.0, 30.0);
    let model = ModelSource::new("biased", &d, &preds);
    let nat = Naturalistic::new(&d);
    for tau in cfg.lookbacks.clone() {
        let a = highway_lc_curve(&ex.anchors, tau, &nat, &d, &cfg);
        let b = highway_lc_curve(&ex.anchors, tau, &model, &d, &cfg);
        assert_eq!(a.curve.counts(), b.curve.counts());
        let a = courtesy_lc_table(&ex.events, tau, &nat, &d, &cfg);
        let b = courtesy_lc_table(&ex.events, tau, &model, &d, &cfg);
        assert_eq!(a.table.total() + a.missing, b.table.total() + b.missing);
    }
}

#[test]
fn synthetic_dataset_round_trips_through_store() {
    let (d, _) = generate_dataset(&params(30, 30, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset_dir(&d, dir.path()).unwrap();
    let back = read_dataset_dir(Path::new(dir.path())).unwrap();
    assert_eq!(back, d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pass_first_monotone_on_monotone_generator(seed in 0u64..1000, scale in 0.2f64..1.5) {
        let p = SynthParams { pass_first_logistic_scale: scale, ..params(3000, 0, seed) };
        let (d, _) = generate_merge_dataset(&p).unwrap();
        let cfg = AnalysisConfig { min_count: 300, ..AnalysisConfig::default() };
        let ex = extract(&d, &cfg);
        let r = pass_first_curve(&ex.events, 5.0, &Naturalistic::new(&d), &d, &cfg).unwrap();
        let vals: Vec<f64> = r.curve.bins.iter().filter(|b| !b.masked).filter_map(|b| b.value).collect();
        // Binomial noise allowance of about four standard errors.
        for w in vals.windows(2) {
            prop_assert!(w[1] >= w[0] - 4.0 * (0.25f64 / 300.0).sqrt());
        }
    }

    #[test]
    fn constant_velocity_exact_on_lines(vx in -2.0f64..2.0, vy in 0.0f64..40.0, x0 in 0.0f64..14.0, y0 in -500.0f64..500.0) {
        let hist: Vec<(f64, Point)> = (0..8).map(|i| {
            let t = 0.4 * i as f64;
            (t, Point::new(x0 + vx * t, y0 + vy * t))
        }).collect();
        let p = constant_velocity_predict(VehicleId(1), &hist).unwrap();
        for (k, q) in p.modes[0].points.iter().enumerate() {
            let t = 2.8 + 0.4 * (k + 1) as f64;
            prop_assert!((q.x - (x0 + vx * t)).abs() < 1e-9);
            prop_assert!((q.y - (y0 + vy * t)).abs() < 1e-9);
        }
    }
}
