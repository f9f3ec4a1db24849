//! The `logkirchhoff` binary: exit codes, outputs and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[model]
a = 1.0
b = 1.0
p = 7.0
lambda = 10.0

[potential]
kind = "step-well"
h0 = 1.0
omega_ball = 1

[truncation]
radius = 5

[sweep]
lambdas = [1.0, 10.0, 100.0]
radii = [5, 6]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_logkirchhoff"));
    c.env_remove("LOGKIRCHHOFF_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn setup(text: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, text).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_sizes() {
    let (dir, cfg) = setup(SMALL);
    let out = run(&["validate", "-c", s(&cfg), "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("omega: 7 vertices"), "{text}");
    assert!(text.contains("D_M (M = 1): 7 vertices"), "{text}");
    assert!(dir.path().join("validate.json").exists());
}

#[test]
fn invalid_config_exits_one_with_line() {
    let (_dir, cfg) = setup(&SMALL.replace("b = 1.0", "b = -1.0"));
    let out = run(&["validate", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4:"), "{err}");

    let (_dir, cfg) = setup(&SMALL.replace("radius = 5", "radius = 1"));
    assert_eq!(run(&["solve", "-c", s(&cfg)]).status.code(), Some(1));
    let (_dir, cfg) = setup(&SMALL.replace("[model]", "[modle]"));
    assert_eq!(run(&["solve", "-c", s(&cfg)]).status.code(), Some(1));
    assert_eq!(run(&["solve", "-c", "/nonexistent/run.toml"]).status.code(), Some(1));
}

#[test]
fn solve_is_byte_identical_and_checks_clean() {
    let (dir, cfg) = setup(SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["solve", "-c", s(&cfg), "--output-dir", s(&a)]).status.code(), Some(0));
    assert_eq!(run(&["solve", "-c", s(&cfg), "--output-dir", s(&b)]).status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    for f in ["solve_nodal.json", "solve_ground.json"] {
        let out = run(&["check", "-i", s(&a.join(f))]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn env_var_redirects_output() {
    let (dir, cfg) = setup(SMALL);
    let target = dir.path().join("from-env");
    let out = bin()
        .args(["limit", "-c", s(&cfg)])
        .env("LOGKIRCHHOFF_OUTPUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("limit_nodal.json").exists());
    assert!(!dir.path().join("output").exists());
}

#[test]
fn corrupted_solution_fails_check() {
    let (dir, cfg) = setup(SMALL);
    run(&["solve", "-c", s(&cfg), "--output-dir", s(dir.path())]);
    let path = dir.path().join("solve_nodal.json");
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let vals = doc["values"].as_array_mut().unwrap();
    let k = (0..vals.len())
        .max_by(|&i, &j| vals[i].as_f64().unwrap().abs().total_cmp(&vals[j].as_f64().unwrap().abs()))
        .unwrap();
    vals[k] = serde_json::json!(vals[k].as_f64().unwrap() * 1.001);
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["check", "-i", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("VIOLATED  euler-lagrange-residual"), "{text}");

    // Support outside the free set.
    let vals = doc["values"].as_array_mut().unwrap();
    vals[0] = serde_json::json!(0.5);
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["check", "-i", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("VIOLATED  support"));

    std::fs::write(&path, "{\"meta\": ").unwrap();
    let out = run(&["check", "-i", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("parse error at byte"));
}

#[test]
fn project_round_trip() {
    let (dir, cfg) = setup(SMALL);
    run(&["solve", "-c", s(&cfg), "--output-dir", s(dir.path())]);
    let nodal = dir.path().join("solve_nodal.json");
    let scaled = dir.path().join("scaled.json");
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&nodal).unwrap()).unwrap();
    for v in doc["values"].as_array_mut().unwrap() {
        let x = v.as_f64().unwrap();
        *v = serde_json::json!(if x > 0.0 { 2.0 * x } else { 0.5 * x });
    }
    std::fs::write(&scaled, serde_json::to_string(&doc).unwrap()).unwrap();
    let back = dir.path().join("back.json");
    let out = run(&["project", "-i", s(&scaled), "--onto", "m", "-o", s(&back)]);
    assert_eq!(out.status.code(), Some(0));
    let a = logkirchhoff::io::read_solution(&nodal).unwrap();
    let b = logkirchhoff::io::read_solution(&back).unwrap();
    let scale = a.field.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (x, y) in a.field.values().iter().zip(b.field.values()) {
        assert!((x - y).abs() / scale < 1e-9);
    }
    let out = run(&["check", "-i", s(&back)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn sweep_writes_fixed_columns() {
    let (dir, cfg) = setup(SMALL);
    let out = run(&["sweep", "-c", s(&cfg), "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,m_lambda,c_lambda,gap,h1_dist,pot_mass,residual_sup"));
    assert_eq!(lines.count(), 3);
    assert!(dir.path().join("radius.csv").exists());
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep_report.json")).unwrap()).unwrap();
    assert_eq!(rep["convergence"]["gap_positive"], serde_json::json!(true));

    // The CSV numbers are recomputable from the stored fields.
    let row: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let value = |out: &Output, key: &str| -> f64 {
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        let line = text.lines().find(|l| l.starts_with(&format!("{key} "))).unwrap().to_string();
        line[key.len() + 1..].parse().unwrap()
    };
    let nodal = run(&["check", "-i", s(&dir.path().join("sweep_1_nodal.json"))]);
    let ground = run(&["check", "-i", s(&dir.path().join("sweep_1_ground.json"))]);
    assert_eq!(nodal.status.code(), Some(0));
    assert_eq!(ground.status.code(), Some(0));
    assert_eq!(value(&nodal, "level"), row[1]);
    assert_eq!(value(&ground, "level"), row[2]);
    assert_eq!(value(&nodal, "pot_mass"), row[5]);
    assert_eq!(value(&nodal, "residual_sup").max(value(&ground, "residual_sup")), row[6]);
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
