use std::path::Path;
use std::process::{Command, Output};

fn pxlap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxlap")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_table_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pxlap(tmp.path(), &["solve", "--n", "64", "--out", "o", "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());
    let csv = std::fs::read_to_string(tmp.path().join("o/solution.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "x,u");
    assert_eq!(rows.len(), 66);
    for row in &rows[1..] {
        for field in row.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:?}"), field);
        }
    }
    let report = read_json(&tmp.path().join("o/solve_report.json"));
    assert_eq!(report["converged"], true);
    assert!(report["energy"].as_f64().unwrap() < 0.0);
    assert_eq!(report["regime"]["tag"], "unique-partial-d");
}

#[test]
fn random_init_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"solver": {"init": {"kind": "random", "seed": 0}}}"#).unwrap();
    for (out, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        assert_eq!(code(&pxlap(tmp.path(), &["solve", "--config", "c.json", "--seed", seed, "--out", out])), 0);
    }
    let init = |d: &str| read_json(&tmp.path().join(d).join("solve_report.json"))["init"]["energy"].clone();
    assert_eq!(init("a"), init("b"));
    assert_ne!(init("a"), init("c"));
}

#[test]
fn check_commands_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["check-convexity", "check-diaz-saa", "check-comparison"] {
        let out = pxlap(tmp.path(), &[cmd, "--samples", "2"]);
        assert_eq!(code(&out), 2, "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn exit_codes_follow_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("r1.json"), r#"{"exponent": {"p": "2", "r": 1}}"#).unwrap();
    std::fs::write(dir.join("qr.json"), r#"{"problem": {"reaction": {"kind": "power", "h": "1", "q": "2"}}}"#).unwrap();
    std::fs::write(dir.join("tight.json"), r#"{"solver": {"max_iters": 1, "grad_tol": 1e-15}}"#).unwrap();
    std::fs::write(dir.join("typo.json"), r#"{"solver": {"max_iter": 3}}"#).unwrap();

    assert_eq!(code(&pxlap(dir, &["check-convexity", "--seed", "1", "--samples", "10"])), 0);
    assert_eq!(code(&pxlap(dir, &["check-convexity", "--config", "r1.json", "--seed", "1", "--samples", "10"])), 1);
    assert_eq!(code(&pxlap(dir, &["validate", "--config", "qr.json"])), 1);
    assert_eq!(code(&pxlap(dir, &["solve", "--config", "qr.json"])), 2);
    assert_eq!(code(&pxlap(dir, &["solve", "--config", "tight.json"])), 3);
    assert_eq!(code(&pxlap(dir, &["solve", "--config", "typo.json"])), 2);
    assert_eq!(code(&pxlap(dir, &["solve", "--config", "missing.json"])), 2);
    assert_eq!(code(&pxlap(dir, &["frobnicate"])), 2);
    assert_eq!(code(&pxlap(dir, &["sweep"])), 2);
    assert_eq!(code(&pxlap(dir, &["eig", "--levels", "0"])), 2);
}

#[test]
fn eig_extrapolates_to_pi_squared() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pxlap(tmp.path(), &["eig", "--r", "2", "--levels", "3", "--out", "e"])), 0);
    let rep = read_json(&tmp.path().join("e/eigen_report.json"));
    let ex = rep["extrapolated"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((ex - pi2).abs() / pi2 < 5e-4);
    assert_eq!(rep["lambdas"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_over_absorption_shrinks_solution() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("s.json"),
        r#"{"exponent": {"p": "2", "r": 1.8},
            "problem": {"kind": "problem2", "reaction": {"kind": "power", "h": "2", "q": "1.5"},
                        "absorption": {"ell": "1", "big_q": "2"}},
            "sweep": {"parameter": "ell_scale", "values": [1, 10, 100]}}"#,
    )
    .unwrap();
    assert_eq!(code(&pxlap(tmp.path(), &["sweep", "--config", "s.json", "--out", "s"])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    let max_u: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(max_u.len(), 3);
    assert!(max_u.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn comparison_and_gap_reports_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.json"),
        r#"{"exponent": {"p": "2 + x", "r": 1.5}, "check": {"f1": "1", "f2": "1.5 + x", "random_pairs": 2}}"#,
    )
    .unwrap();
    assert_eq!(code(&pxlap(tmp.path(), &["check-comparison", "--config", "c.json", "--seed", "5", "--out", "c"])), 0);
    let rep = read_json(&tmp.path().join("c/comparison.json"));
    assert_eq!(rep["cases"].as_array().unwrap().len(), 3);
    assert_eq!(code(&pxlap(tmp.path(), &["check-diaz-saa", "--nx", "8", "--seed", "2", "--samples", "3"])), 2);
    assert_eq!(code(&pxlap(tmp.path(), &["check-diaz-saa", "--seed", "2", "--samples", "5", "--out", "d"])), 0);
    let text = std::fs::read_to_string(tmp.path().join("d/diaz_saa.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let gap = v["min_relative_gap"].as_f64().unwrap();
    assert!(text.contains(&format!("\"min_relative_gap\": {gap:?}")));
}
