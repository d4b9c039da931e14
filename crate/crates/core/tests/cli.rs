use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tailq"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "model": {"lambda": [0.5], "mu": [1.0]},
    "targets": [{"class": 1, "p": 0.99}],
    "m1": 3000, "m2": 3000, "batches": 10,
    "ce": {"cycles_per_iteration": 2000, "pilot_cycles": 2000},
    "baselines": [{"kind": "naive"}]
}"#;

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["estimate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["estimate", "--config", "/nonexistent/x.json"])), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["estimate", "--config", cfg, "--gamma-max", "soon"])), 2);
    assert_eq!(code(&run(&["estimate", "--config", cfg, "--class", "2"])), 2);
    assert_eq!(code(&run(&["estimate", "--config", cfg, "--batches", "1"])), 2);
    assert_eq!(code(&run(&["estimate", "--config", cfg, "--format", "xml"])), 2);
    let unstable = write_config(
        dir.path(),
        "u.json",
        r#"{"model": {"lambda": [1.5], "mu": [1.0]}, "targets": [{"class": 1, "p": 0.9}]}"#,
    );
    assert_eq!(code(&run(&["estimate", "--config", unstable.to_str().unwrap()])), 2);
    let unequal = write_config(dir.path(), "m.json", &SMALL.replace(r#""m2": 3000"#, r#""m2": 6000"#));
    assert_eq!(code(&run(&["estimate", "--config", unequal.to_str().unwrap()])), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rare.json",
        r#"{"model": {"lambda": [0.3, 0.0005], "mu": [1.0, 1.0]},
            "targets": [{"class": 2, "p": 0.99, "gamma_max": 20}],
            "m1": 40, "m2": 40, "batches": 20,
            "baselines": [{"kind": "naive"}]}"#,
    );
    let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn event_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cap.json",
        r#"{"model": {"lambda": [0.5], "mu": [1.0]},
            "targets": [{"class": 1, "p": 0.99}],
            "m1": 3000, "m2": 3000, "batches": 10, "max_events": 20000,
            "ce": {"cycles_per_iteration": 2000, "pilot_cycles": 2000},
            "baselines": [{"kind": "static_tilt", "name": "runaway", "lambda": [2.0], "mu": [0.5], "gamma_max": 1e9}]}"#,
    );
    let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn output_is_deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let cfg = cfg.to_str().unwrap();
    let a = run(&["estimate", "--config", cfg, "--format", "csv", "--seed", "9"]);
    let b = run(&["estimate", "--config", cfg, "--format", "csv", "--seed", "9", "--workers", "3"]);
    let c = run(&["estimate", "--config", cfg, "--format", "csv", "--seed", "10"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("class,method,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn out_dir_gets_tables_and_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out_dir = dir.path().join("results");
    let out = run(&[
        "ce-search",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["ce_search.json", "ce_history.json", "ce_search_timings.json"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.as_array().is_some_and(|rows| !rows.is_empty()), "{name}");
    }
}

#[test]
fn validate_reports_mm1_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = run(&["validate", "--config", cfg.to_str().unwrap(), "--gamma", "4", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &v[0];
    let exact = (-0.5f64 * 4.0).exp();
    assert!((row["reference"].as_f64().unwrap() - exact).abs() < 1e-12, "{row}");
}
