#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small, fast configuration shared by the CLI tests.
pub const SMALL_CONFIG: &str = r#"{
  "synth": {"n_students": 600, "n_schools": 20},
  "fit": {
    "bart": {"n_trees": 20, "n_iter": 200, "n_burn": 50, "n_chains": 2},
    "rf": {"n_trees": 50}
  },
  "tune": {
    "budget": 2,
    "bart_space": {"model": "bart", "n_trees": [10, 30], "k": [1, 5], "alpha": [0.5, 0.99], "beta": [1, 3]},
    "rf_space": {"model": "rf", "n_trees": [20, 60], "mtry": [1, null], "min_node_size": [1, 50]}
  },
  "sweep": {"months": [3, 7, 11]}
}"#;

pub fn lmsbart(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmsbart"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("spawn lmsbart")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = lmsbart(dir, args);
    assert!(
        out.status.success(),
        "lmsbart {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_config(dir: &Path, text: &str) {
    fs::write(dir.join("cfg.json"), text).unwrap();
}

/// Every command of the tool, run in order against `dir` with the small config.
pub fn run_pipeline(dir: &Path) {
    write_config(dir, SMALL_CONFIG);
    let c = ["--config", "cfg.json", "--seed", "7"];
    let with = |rest: &[&str]| -> Vec<String> { c.iter().chain(rest).map(|s| s.to_string()).collect() };
    let steps: Vec<Vec<String>> = vec![
        with(&["--out", "data", "synth"]),
        with(&["--out", "out", "features", "--data", "data"]),
        with(&["--out", "out", "fit", "--data", "data", "--model", "bart"]),
        with(&["--out", "out", "fit", "--data", "data", "--model", "rf"]),
        with(&[
            "--out",
            "out",
            "eval",
            "--data",
            "data",
            "--model",
            "out/bart_m05.model",
        ]),
        with(&["--out", "out", "eval", "--data", "data", "--model", "out/rf_m05.model"]),
        with(&[
            "--out",
            "out",
            "ranef",
            "--data",
            "data",
            "--model",
            "out/bart_m05.model",
        ]),
        with(&[
            "--out",
            "out",
            "profiles",
            "--data",
            "data",
            "--model",
            "out/bart_m05.model",
        ]),
        with(&["--out", "out", "tune", "--data", "data", "--model", "rf"]),
        with(&["--out", "out", "sweep", "--data", "data"]),
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        ok(dir, &args);
    }
}

/// All files under `dir`, relative, sorted.
pub fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// JSON summary with the run metadata removed.
pub fn strip_metadata(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    if let Some(o) = v.as_object_mut() {
        o.remove("metadata");
    }
    v
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
