use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psinehari"))
        .current_dir(dir)
        .args(args)
        .env_remove("PSINEHARI_SEED")
        .output()
        .expect("spawn psinehari")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{"grid": {"n": 33, "dim": 1}, "solver": {"restarts": 2}}"#;

#[test]
fn validate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["validate"]).status.code(), Some(0));

    let r5 = write(d, "r5.json", r#"{"problem": {"r": 5.0}}"#);
    let out = run(d, &["--config", &r5, "validate"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.contains("FAIL") && l.contains("q<r<p*_α")), "{text}");

    let bad = write(d, "bad.json", "{\"problem\": ");
    assert_eq!(run(d, &["--config", &bad, "validate"]).status.code(), Some(2));
    let unknown = write(d, "unknown.json", r#"{"problem": {"lamda": 1.0}}"#);
    assert_eq!(run(d, &["--config", &unknown, "validate"]).status.code(), Some(2));
    assert_eq!(run(d, &["--config", "missing.json", "validate"]).status.code(), Some(2));
    assert_eq!(run(d, &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn fiber_report_default_and_large_lambda() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = run(d, &["--output", "f", "fiber-report", "--direction", "sine"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&d.join("f/fiber.json"));
    let r = &rep["report"];
    let (t1, t0, t2) = (r["t1"].as_f64().unwrap(), r["t0"].as_f64().unwrap(), r["t2"].as_f64().unwrap());
    assert!(t1 < t0 && t0 < t2);
    let curve = std::fs::read_to_string(d.join("f/fiber_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("t,w,w1,w2,phi,phi_hat"));
    assert_eq!(lines.count(), 512);

    // well above the critical λ of the sine direction
    let big = write(d, "big.json", r#"{"problem": {"lambda": 1000.0}}"#);
    let out = run(d, &["--config", &big, "--output", "g", "fiber-report"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&d.join("g/fiber.json"));
    assert!(rep["report"]["gap"].as_f64().unwrap() <= 0.0);
    assert!(rep["report"]["t1"].is_null() && rep["report"]["t2"].is_null());
    assert_eq!(rep["two_roots"], Value::Bool(false));
}

#[test]
fn frac_apply_half_integral_of_one() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let n = 65;
    let mut csv = String::from("i,value\n");
    for i in 0..n {
        csv.push_str(&format!("{i},1\n"));
    }
    let input = write(d, "one.csv", &csv);
    let cfg = write(d, "c.json", &format!(r#"{{"grid": {{"n": {n}, "dim": 1}}}}"#));
    let out = run(
        d,
        &["--config", &cfg, "frac-apply", "--alpha", "0.5", "--axis", "1", "--input", &input, "--out", "half.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("half.csv")).unwrap();
    let gamma_1_5 = 0.886_226_925_452_758;
    for (i, line) in text.lines().skip(1).enumerate() {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        let x = i as f64 / (n - 1) as f64;
        assert!((v - x.sqrt() / gamma_1_5).abs() < 1e-12, "node {i}: {v}");
    }
    // axis 2 on a 1-D grid and a bad order are usage errors
    let out =
        run(d, &["--config", &cfg, "frac-apply", "--alpha", "0.5", "--axis", "2", "--input", &input, "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(d, &["--config", &cfg, "frac-apply", "--alpha", "1.5", "--input", &input, "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn frac_apply_hilfer_on_two_dimensional_field() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let n = 17;
    let mut csv = String::from("i,j,value\n");
    for i in 0..n {
        for j in 0..n {
            csv.push_str(&format!("{i},{j},{}\n", (i * j) as f64 / ((n - 1) * (n - 1)) as f64));
        }
    }
    let input = write(d, "bil.csv", &csv);
    let cfg = write(d, "c.json", &format!(r#"{{"grid": {{"n": {n}}}}}"#));
    let out = run(
        d,
        &[
            "--config",
            &cfg,
            "frac-apply",
            "--side",
            "right",
            "--alpha",
            "0.7",
            "--beta",
            "0.4",
            "--axis",
            "2",
            "--input",
            &input,
            "--out",
            "d.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), n * n + 1);
    // row i = 0 of x₁x₂ is identically zero, so is its image
    for line in text.lines().skip(1).take(n) {
        let v: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn solve_seed_override_and_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = write(d, "small.json", SMALL);
    let out = run(d, &["--config", &cfg, "--output", "a", "solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&d.join("a/summary.json"));
    assert_eq!(s["status"], "ok");
    assert_eq!(s["seed"], 42);
    assert!(s["energy_u_star"]["total"].as_f64().unwrap() < 0.0);
    assert!(s["energy_v_star"]["total"].as_f64().unwrap() > 0.0);
    assert_eq!(s["u_star"]["branch"], "N_plus");
    assert_eq!(s["v_star"]["class"]["tag"], "N_minus");
    let u = std::fs::read_to_string(d.join("a/u_star.csv")).unwrap();
    assert_eq!(u.lines().count(), 34);

    let seeded = Command::new(env!("CARGO_BIN_EXE_psinehari"))
        .current_dir(d)
        .args(["--config", &cfg, "--output", "b", "solve"])
        .env("PSINEHARI_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(seeded.status.code(), Some(0));
    assert_eq!(json(&d.join("b/summary.json"))["seed"], 7);

    let bad_seed = Command::new(env!("CARGO_BIN_EXE_psinehari"))
        .current_dir(d)
        .args(["--config", &cfg, "solve"])
        .env("PSINEHARI_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad_seed.status.code(), Some(2));
}

#[test]
fn solve_failure_writes_partial_summary() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = write(
        d,
        "huge.json",
        r#"{"grid": {"n": 17, "dim": 1}, "problem": {"lambda": 1e9}, "solver": {"restarts": 1}}"#,
    );
    let out = run(d, &["--config", &cfg, "--output", "f", "solve"]);
    assert_eq!(out.status.code(), Some(1));
    let s = json(&d.join("f/summary.json"));
    assert_eq!(s["status"], "failed");
    assert!(s["reason"].as_str().unwrap().contains("too large"));
}

#[test]
fn sweep_writes_documented_columns() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = write(d, "small.json", SMALL);
    let out = run(d, &["--config", &cfg, "--output", "s", "--jobs", "2", "sweep", "--lambdas", "1e-4,1e-3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(d.join("s/sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,m_plus,m_minus,res_plus,res_minus,iters_plus,iters_minus,converged_plus,converged_minus")
    );
    assert_eq!(lines.count(), 2);
    assert_eq!(run(d, &["--config", &cfg, "sweep", "--lambdas", "1e-3,x"]).status.code(), Some(2));
    assert_eq!(run(d, &["--config", &cfg, "sweep", "--lambdas", "1e-3,1e-4"]).status.code(), Some(2));
}

#[test]
fn oracle_checks() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = run(d, &["oracle", "--check", "integral-bilinear"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert!(v["rel_diff"].as_f64().unwrap() < 1e-14);
    let all = run(d, &["oracle"]);
    assert_eq!(String::from_utf8_lossy(&all.stdout).lines().count(), 9);
    assert_eq!(run(d, &["oracle", "--check", "nonsense"]).status.code(), Some(2));
}
