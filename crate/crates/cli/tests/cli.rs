use fraxolve_cli::config::parse_config;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraxolve"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn ml_spot_value() {
    let o = run(&["ml", "--alpha", "0.5", "--s", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.4275836");
}

#[test]
fn mesh_count_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mesh":{"M":0}}"#);
    let o = run(&["pde", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mesh.M must be ≥ 1"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"meshh":{"M":4}}"#);
    let o = run(&["pde", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("meshh"), "{}", stderr(&o));
}

#[test]
fn nested_unknown_key_has_path_and_line() {
    let err = parse_config("{\n  \"solver\": {\"nonlin_tol\": 1e-8,\n \"damp\": 0.5}\n}").unwrap_err();
    assert!(err.0.contains("solver.damp"), "{}", err.0);
    assert!(err.0.contains("line 3"), "{}", err.0);
}

#[test]
fn expression_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem":{"alpha":0.5,"f":{"kind":"zero"},"u0":"sin(x"},"mesh":{"M":4},"grid":{"d":1,"N":4}}"#,
    );
    let o = run(&["pde", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("problem.u0") && stderr(&o).contains("position 5"), "{}", stderr(&o));
}

#[test]
fn experiment_config_initial_data() {
    let text = std::fs::read_to_string(data("experiment.json")).unwrap();
    let plan = parse_config(&text).unwrap().pde_plan().unwrap();
    let h = std::f64::consts::FRAC_PI_2;
    let v = (plan.problem.u0)(&[h, h], 0.0);
    let pi = std::f64::consts::PI;
    assert!((v - 0.4 * (pi - pi * pi / 4.0)).abs() < 1e-14);
    assert!((v - 0.269677).abs() < 1e-6);
    assert_eq!(plan.mesh.num_steps(), 64);
    assert_eq!(plan.grid.n(), 32);
}

#[test]
fn pde_run_writes_artifacts_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = data("small_1d.json");
    for dir in [a.path(), b.path()] {
        let o = run(&["pde", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let sa = std::fs::read(a.path().join("solution.csv")).unwrap();
    let sb = std::fs::read(b.path().join("solution.csv")).unwrap();
    assert_eq!(sa, sb);
    let text = String::from_utf8(sa).unwrap();
    assert!(text.starts_with("m,t,node,x,y,U\n"));
    // 13 levels of 17 nodes
    assert_eq!(text.lines().count(), 1 + 13 * 17);

    let man: Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let hash = man["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let arts = man["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 2);
    assert!(arts.iter().all(|x| x["config_hash"] == hash));
    assert_eq!(man["range_ok"], Value::Bool(true));
    assert_eq!(man["restriction"]["pass"], Value::Bool(true));
    assert!(man["timings"]["solve"].as_f64().unwrap() >= 0.0);
    assert_eq!(man["versions"]["fraxolve"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn flags_override_config_and_change_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = data("small_1d.json");
    let c = cfg.to_str().unwrap();
    assert!(run(&["pde", "--config", c, "--out", a.path().to_str().unwrap()]).status.success());
    assert!(run(&["pde", "--config", c, "--M", "6", "--out", b.path().to_str().unwrap()]).status.success());
    let read = |p: &Path| -> Value { serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap() };
    let (ma, mb) = (read(a.path()), read(b.path()));
    assert_ne!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(mb["config"]["mesh"]["M"], 6);
}

#[test]
fn solver_failure_exits_2() {
    // lambda = 1 with a single huge step breaks the strict step restriction
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem":{"alpha":0.5,"f":{"kind":"fisher"},"u0":0.5},"mesh":{"M":1,"T":100},"solver":{"strict_restriction":true}}"#,
    );
    let o = run(&["scalar", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("step restriction"), "{}", stderr(&o));
}

#[test]
fn scalar_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scalar", "--alpha", "0.5", "--f", "allen_cahn", "--u0", "-0.3", "--M", "32", "--r", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("scalar.csv")).unwrap();
    assert_eq!(csv.lines().count(), 34);
    assert!(stdout(&o).contains("range preserved"));
    let o = run(&["scalar", "--alpha", "0.5", "--u0", "0.1", "--M", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("problem.f is required"));
}

#[test]
fn table_budget_guard() {
    let o = run(&["table", "--preset", "table2", "--scale", "paper"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));
    let o = run(&["table", "--preset", "table1", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stability_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "stability", "--alpha", "0.5", "--lambda", "2", "--gamma", "-0.5", "--r", "2", "--M", "32", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("bounded"));
    assert!(stdout(&o).contains("0 violations in 100 pairs"));
    let csv = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("M,max_ratio,growth"));
    assert_eq!(csv.lines().count(), 4);
    // the gate rejects r > (2 - alpha)/alpha for gamma > alpha - 1
    let o = run(&["stability", "--alpha", "0.5", "--gamma", "1", "--r", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_suite_passes() {
    let o = run(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn bad_arguments_exit_1() {
    let o = run(&["ml", "--alpha"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn thread_cap_is_validated() {
    let o = bin().env("FRAXOLVE_THREADS", "zero").args(["ml", "--alpha", "0.5", "--s", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().env("FRAXOLVE_THREADS", "1").args(["ml", "--alpha", "0.5", "--s", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}
