use lmsbart::bart::{self, BartConfig, Grouping, Response};
use lmsbart::data_model::build_features;
use lmsbart::eval::*;
use lmsbart::rf::{fit_rf, RfConfig};
use lmsbart::synth::{generate, SynthConfig};
use lmsbart::Error;

fn small() -> SynthConfig {
    SynthConfig {
        n_students: 600,
        n_schools: 20,
        ..SynthConfig::default()
    }
}

fn quick_bart() -> BartConfig {
    BartConfig {
        n_trees: 20,
        n_iter: 300,
        n_burn: 100,
        n_chains: 1,
        ..BartConfig::default()
    }
}

#[test]
fn partition_reuses_the_same_students_every_month() {
    let (entities, _) = generate(&small()).unwrap();
    let f3 = build_features(&entities, 3).unwrap();
    let f11 = build_features(&entities, 11).unwrap();
    let p = Partition::stratified(&f3, 0.25, 9).unwrap();
    let (a_train, a_test) = p.apply(&f3).unwrap();
    let (b_train, b_test) = p.apply(&f11).unwrap();
    assert_eq!(a_train.student_ids, b_train.student_ids);
    assert_eq!(a_test.student_ids, b_test.student_ids);
    assert!(a_train.matrix.n_cols() < b_train.matrix.n_cols());
    assert_eq!(a_train.n_rows() + a_test.n_rows(), f3.n_rows());
}

#[test]
fn tuning_budget_of_one_returns_its_only_trial() {
    let (entities, _) = generate(&small()).unwrap();
    let fm = build_features(&entities, 5).unwrap();
    let base = ModelConfig::Rf(RfConfig {
        n_trees: 30,
        ..RfConfig::default()
    });
    let space = SearchSpace::Rf {
        n_trees: (20, 40),
        mtry: (1, None),
        min_node_size: (1, 50),
    };
    let result = tune(&base, &space, 1, &fm, 0.25, 4).unwrap();
    assert_eq!(result.trace.len(), 1);
    assert_eq!(result.best, result.trace[0].config);
    assert_eq!(Some(result.best_auc), result.trace[0].auc);
    assert_eq!(tune(&base, &space, 1, &fm, 0.25, 4).unwrap(), result);
}

#[test]
fn tuning_reports_every_failure() {
    let (entities, _) = generate(&small()).unwrap();
    let mut fm = build_features(&entities, 5).unwrap();
    fm.response.iter_mut().for_each(|y| *y = 1);
    let err = tune(
        &ModelConfig::Bart(quick_bart()),
        &SearchSpace::bart_default(),
        3,
        &fm,
        0.25,
        1,
    )
    .unwrap_err();
    match err {
        Error::TuningFailed { failures } => assert_eq!(failures.len(), 3),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn profile_grid_has_fifteen_rows_differing_only_in_usage_and_quintile() {
    let (entities, _) = generate(&small()).unwrap();
    let fm = build_features(&entities, 5).unwrap();
    let grouping = Grouping::from_labels(&fm.school_ids);
    let draws = bart::fit(
        &fm.matrix,
        Response::Binary(&fm.response),
        Some(&grouping),
        &quick_bart(),
    )
    .unwrap();
    let grid = profile_grid(&fm, &draws, 3).unwrap();
    assert_eq!(grid.rows.len(), 15);
    assert_eq!(grid.inputs.n_rows(), 15);
    let usage = fm.usage_columns();
    let quintile = fm.matrix.column_index("sociocultural_context").unwrap();
    for j in 0..grid.inputs.n_cols() {
        let col = grid.inputs.column(j);
        if usage.contains(&j) {
            for k in 0..15 {
                // same usage level, same value
                assert_eq!(col[k].to_bits(), col[(k / 5) * 5].to_bits());
            }
        } else if j == quintile {
            assert!(col.iter().enumerate().all(|(k, &v)| v == (k % 5 + 1) as f64));
        } else {
            assert!(col.iter().all(|v| v.to_bits() == col[0].to_bits()), "column {j} varies");
        }
    }
    for r in &grid.rows {
        assert!(r.lower <= r.probability && r.probability <= r.upper);
    }
}

#[test]
fn ranef_report_covers_every_known_school_once() {
    let (entities, _) = generate(&small()).unwrap();
    let fm = build_features(&entities, 5).unwrap();
    let grouping = Grouping::from_labels(&fm.school_ids);
    let draws = bart::fit(
        &fm.matrix,
        Response::Binary(&fm.response),
        Some(&grouping),
        &quick_bart(),
    )
    .unwrap();
    let mut quintiles = school_quintiles(&entities);
    let report = ranef_report(&draws, &quintiles).unwrap();
    assert_eq!(report.schools.len(), 20);
    let total = report.count(Flag::Positive) + report.count(Flag::Negative) + report.count(Flag::Null);
    assert_eq!(total, 20);
    for s in &report.schools {
        assert_eq!(s.flag, Flag::from_summary(s.mean, s.sd));
    }
    let dropped = report.schools[0].school_id.clone();
    quintiles.remove(&dropped);
    let partial = ranef_report(&draws, &quintiles).unwrap();
    assert_eq!(partial.schools.len(), 19);
    assert!(partial.schools.iter().all(|s| s.school_id != dropped));
}

#[test]
fn rf_out_of_bag_error_tracks_held_out_error() {
    let (entities, _) = generate(&SynthConfig::default()).unwrap();
    let fm = build_features(&entities, 5).unwrap();
    let (train, test) = Partition::stratified(&fm, 0.25, 2).unwrap().apply(&fm).unwrap();
    let y: Vec<usize> = train.response.iter().map(|&v| usize::from(v)).collect();
    let forest = fit_rf(&train.matrix, &y, &RfConfig::default()).unwrap();
    let oob = forest.oob_error(&train.matrix, &y).unwrap();
    let pred = forest.predict(&test.matrix).unwrap();
    let held_out = pred
        .iter()
        .zip(&test.response)
        .filter(|(p, y)| **p != usize::from(**y))
        .count() as f64
        / pred.len() as f64;
    assert!((oob - held_out).abs() <= 0.05, "oob {oob:.4} held-out {held_out:.4}");
}

#[test]
fn sweep_without_signal_stays_near_chance() {
    let config = SynthConfig {
        usage_effect: 0.0,
        sigma_u: 0.0,
        quintile_effects: [0.0; 5],
        ..SynthConfig::default()
    };
    let (entities, _) = generate(&config).unwrap();
    let spec = SweepSpec {
        months: vec![3, 7, 11],
        rf: RfConfig {
            n_trees: 200,
            ..RfConfig::default()
        },
        bart: BartConfig {
            n_trees: 50,
            n_iter: 400,
            n_burn: 100,
            n_chains: 1,
            ..BartConfig::default()
        },
        ..SweepSpec::default()
    };
    let variants = [Variant::ALL[0], Variant::ALL[2]];
    let result = month_sweep(&entities, &variants, &spec).unwrap();
    assert_eq!(result.cells.len(), 6);
    for c in &result.cells {
        let auc = c.auc.unwrap();
        assert!(
            (0.45..=0.55).contains(&auc),
            "{:?} month {} auc {auc}",
            c.model,
            c.month
        );
    }
}

#[test]
fn single_point_space_returns_that_point() {
    let (entities, _) = generate(&small()).unwrap();
    let fm = build_features(&entities, 4).unwrap();
    let base = ModelConfig::Rf(RfConfig::default());
    let space = SearchSpace::Rf {
        n_trees: (25, 25),
        mtry: (3, Some(3)),
        min_node_size: (7, 7),
    };
    let result = tune(&base, &space, 3, &fm, 0.25, 2).unwrap();
    assert_eq!(result.trace.len(), 3);
    let ModelConfig::Rf(best) = &result.best else {
        panic!("expected RF")
    };
    assert_eq!((best.n_trees, best.mtry, best.min_node_size), (25, Some(3), 7));
}

#[test]
fn tuned_rf_is_not_worse_than_default_on_held_out_data() {
    let (entities, _) = generate(&SynthConfig::default()).unwrap();
    let fm = build_features(&entities, 5).unwrap();
    let (train, test) = Partition::stratified(&fm, 0.25, 1).unwrap().apply(&fm).unwrap();
    let base = ModelConfig::Rf(RfConfig::default());
    let tuned = tune(&base, &SearchSpace::rf_default(), 10, &train, 0.25, 3).unwrap();
    let auc = |c: &ModelConfig| roc_auc(&fit_predict(c, &train, &test).unwrap(), &test.response).unwrap();
    let (a_default, a_tuned) = (auc(&base), auc(&tuned.best));
    assert!(a_tuned >= a_default - 0.01, "tuned {a_tuned} default {a_default}");
}
