mod common;

use std::fs;

use common::{csv_rows, lmsbart, ok, write_config, SMALL_CONFIG};
use lmsbart::data_model::io::ENTITY_FILES;
use lmsbart::synth::GROUND_TRUTH_FILE;

#[test]
fn synth_defaults_write_the_entity_layout() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "data", "synth"]);
    for f in ENTITY_FILES.iter().chain([&GROUND_TRUTH_FILE]) {
        assert!(dir.path().join("data").join(f).is_file(), "missing {f}");
    }
    let truth: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("data").join(GROUND_TRUTH_FILE)).unwrap()).unwrap();
    assert!(truth.is_object());
}

#[test]
fn synth_rejects_fewer_students_than_schools() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"synth": {"n_students": 10, "n_schools": 20}}"#);
    let out = lmsbart(dir.path(), &["--config", "cfg.json", "synth"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_students"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"synth": {"n_student": 10}}"#);
    let out = lmsbart(dir.path(), &["--config", "cfg.json", "synth"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_student"));
}

#[test]
fn bart_fit_reports_every_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_CONFIG.replace(r#""n_chains": 2"#, r#""n_chains": 4"#);
    write_config(dir.path(), &cfg);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    ok(
        dir.path(),
        &[
            "--config", "cfg.json", "--out", "out", "fit", "--data", "data", "--model", "bart",
        ],
    );
    assert!(dir.path().join("out/bart_m05.model").is_file());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/bart_m05_fit.json")).unwrap()).unwrap();
    let chains = report["result"]["chains"].as_array().unwrap();
    assert_eq!(chains.len(), 4);
    let seeds: std::collections::BTreeSet<u64> = chains.iter().map(|c| c["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds.len(), 4);
    assert_eq!(report["result"]["n_groups"], 20);
    assert!(chains.iter().all(|c| c["sigma_u2"].is_object()));
}

#[test]
fn rf_fit_then_eval_writes_four_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    ok(
        dir.path(),
        &[
            "--config", "cfg.json", "--out", "out", "fit", "--data", "data", "--model", "rf",
        ],
    );
    ok(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "--out",
            "out",
            "eval",
            "--data",
            "data",
            "--model",
            "out/rf_m05.model",
        ],
    );
    let rows = csv_rows(&dir.path().join("out/metrics_rf_m05.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["accuracy", "sens", "spec", "roc_auc"]);
    for r in &rows {
        let v: f64 = r[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn single_class_response_fails_the_probit_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_CONFIG.replace(r#""n_schools": 20"#, r#""n_schools": 20, "base_score": 5000.0"#);
    write_config(dir.path(), &cfg);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    let out = lmsbart(
        dir.path(),
        &[
            "--config", "cfg.json", "--out", "out", "fit", "--data", "data", "--model", "bart",
        ],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate response"), "{err}");
}

#[test]
fn sweep_covers_every_month_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_CONFIG.replace(r#""sweep": {"months": [3, 7, 11]}"#, r#""sweep": {}"#);
    write_config(dir.path(), &cfg);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    ok(
        dir.path(),
        &[
            "--config", "cfg.json", "--out", "out", "sweep", "--data", "data", "--budget", "1",
        ],
    );
    let rows = csv_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 36);
    for m in 3..=11 {
        assert_eq!(rows.iter().filter(|r| r[2] == m.to_string()).count(), 4);
    }
    assert!(rows.iter().all(|r| r[4] == "ok"), "{rows:?}");
    assert!(dir.path().join("out/sweep.svg").is_file());
}

#[test]
fn profiles_and_ranef_from_a_bart_fit() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    ok(
        dir.path(),
        &[
            "--config", "cfg.json", "--out", "out", "fit", "--data", "data", "--model", "bart",
        ],
    );
    ok(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "--out",
            "out",
            "profiles",
            "--data",
            "data",
            "--model",
            "out/bart_m05.model",
        ],
    );
    ok(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "--out",
            "out",
            "ranef",
            "--data",
            "data",
            "--model",
            "out/bart_m05.model",
        ],
    );
    let rows = csv_rows(&dir.path().join("out/profiles.csv"));
    assert_eq!(rows.len(), 15);
    for r in &rows {
        let (p, lo, hi): (f64, f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!(lo <= p && p <= hi, "{r:?}");
    }
    assert_eq!(csv_rows(&dir.path().join("out/ranef.csv")).len(), 20);
}

#[test]
fn missing_model_artifact_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    ok(dir.path(), &["--config", "cfg.json", "--out", "data", "synth"]);
    let out = lmsbart(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "eval",
            "--data",
            "data",
            "--model",
            "nowhere/absent.model",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/absent.model"));
}

#[test]
fn bad_month_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmsbart(dir.path(), &["features", "--data", ".", "--month", "12"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("month"));
}
