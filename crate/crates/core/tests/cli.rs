use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hdglm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdglm")).args(args).output().expect("spawn hdglm")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = hdglm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn code(args: &[&str]) -> i32 {
    hdglm(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn generate(&self, name: &str, model: &str, seed: &str) -> PathBuf {
        let out = self.path(name);
        ok(&["generate", "--n", "300", "--p", "30", "--model", model, "--seed", seed, "-o", s(&out)]);
        out
    }
}

#[test]
fn generate_is_deterministic_and_writes_the_truth() {
    let ws = Workspace::new();
    let a = ws.generate("a.csv", "poisson-clippedexp", "5");
    let truth_a = std::fs::read(ws.path("beta_true.csv")).unwrap();
    let b = ws.path("b.csv");
    let beta_b = ws.path("beta_b.csv");
    ok(&["generate", "--n", "300", "--p", "30", "--seed", "5", "-o", s(&b), "--beta-out", s(&beta_b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(truth_a, std::fs::read(&beta_b).unwrap());
    let c = ws.path("c.csv");
    ok(&["generate", "--n", "300", "--p", "30", "--seed", "6", "-o", s(&c), "--beta-out", s(&ws.path("x.csv"))]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn every_numeric_subcommand_is_reproducible() {
    let ws = Workspace::new();
    let data = ws.generate("d.csv", "poisson-clippedexp", "1");
    let d = s(&data);
    let runs: Vec<Vec<&str>> = vec![
        vec!["fit", d],
        vec!["fit", d, "--lambda", "2.5"],
        vec!["calibrate", d, "--seed", "3", "--m", "20000"],
        vec!["se-solve", "--kappa", "0.2", "--gamma2", "1", "--m", "20000", "--seed", "4"],
        vec!["se-figures", "--kappa", "0.1,0.2", "--gamma2", "1", "--m", "5000", "--seed", "4", "--reps", "2"],
        vec!["infer", d, "--seed", "2", "--m-curve", "20000", "--m-se", "10000"],
        vec![
            "coverage", "--scenario", "coverage-comparison", "--n", "200", "--kappa", "0.1", "--reps", "3",
            "--seed", "9", "--m-curve", "20000", "--m-se", "5000",
        ],
        vec!["prox-eval", "--eta", "0.5", "--x", "-1,0,2.5"],
    ];
    for args in runs {
        let first = ok(&args);
        let second = ok(&args);
        assert!(!first.is_empty(), "{args:?} printed nothing");
        assert_eq!(first, second, "{args:?} is not reproducible");
    }
}

#[test]
fn pipeline_produces_intervals_for_every_coordinate() {
    let ws = Workspace::new();
    let data = ws.generate("d.csv", "poisson-clippedexp", "12");
    let json = ws.path("infer.json");
    let csv = ws.path("ci.csv");
    let lp = ws.path("lp.csv");
    ok(&[
        "infer", s(&data), "--seed", "1", "--alpha", "0.05", "--m-curve", "50000", "--m-se", "20000", "--json", s(&json),
        "--csv", s(&csv), "--linear-predictor-csv", s(&lp),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let rows = v["corrected"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r["lo"].as_f64().unwrap() < r["hi"].as_f64().unwrap()));
    assert_eq!(v["classical"]["rows"].as_array().unwrap().len(), 30);
    assert!(v["se"]["mu"].as_f64().unwrap() > 0.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 31);
    assert_eq!(std::fs::read_to_string(&lp).unwrap().lines().count(), 301);

    let fit_out = ws.path("beta_hat.csv");
    ok(&["fit", s(&data), "-o", s(&fit_out)]);
    assert!(std::fs::read_to_string(&fit_out).unwrap().lines().filter(|l| !l.is_empty()).count() >= 30);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["se-solve", "--kappa", "0.2", "--gamma2", "1"]), 1);
    assert_eq!(code(&["se-solve", "--kappa", "0.2", "--gamma2", "1", "--seed", "1", "--model", "nope"]), 1);
    assert_eq!(code(&["se-solve", "--kappa", "1.5", "--gamma2", "1", "--seed", "1"]), 1);
    assert_eq!(code(&["infer", "/nonexistent/data.csv", "--seed", "1"]), 1);
    assert_eq!(code(&["generate", "--n", "10", "--seed", "1", "-o", "/tmp/x.csv"]), 1);

    let ws = Workspace::new();
    let data = ws.generate("lin.csv", "linear", "3");
    assert_eq!(code(&["infer", s(&data), "--model", "linear", "--seed", "1", "--m-curve", "1000"]), 2);
    assert_eq!(code(&["se-solve", "--kappa", "0.2", "--gamma2", "0", "--seed", "1"]), 2);
}

#[test]
fn config_file_matches_flags() {
    let ws = Workspace::new();
    let cfg = ws.path("run.cfg");
    std::fs::write(&cfg, "# small solve\nkappa = 0.3\ngamma2 = 2\nm = 10000\nseed = 8\nmodel = logistic\n").unwrap();
    let from_cfg = ok(&["--config", s(&cfg), "se-solve"]);
    let from_flags = ok(&["se-solve", "--kappa", "0.3", "--gamma2", "2", "--m", "10000", "--seed", "8", "--model", "logistic"]);
    assert_eq!(from_cfg, from_flags);
    let overridden = ok(&["se-solve", "--config", s(&cfg), "--seed", "9"]);
    assert_ne!(overridden, from_flags);
    std::fs::write(&cfg, "kappa 0.3\n").unwrap();
    assert_eq!(code(&["--config", s(&cfg), "se-solve"]), 1);
}

#[test]
fn se_solve_reports_small_residuals() {
    let out = ok(&["se-solve", "--kappa", "0.2", "--gamma2", "1", "--m", "20000", "--seed", "4", "--tol", "1e-9"]);
    let v: Value = serde_json::from_slice(&out).unwrap();
    for r in v["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap().abs() < 1e-6, "{v}");
    }
    assert_eq!(v["panel_checksum"].as_str().unwrap().len(), 16);
}

#[test]
fn se_figures_csv_layout() {
    let out = ok(&["se-figures", "--kappa", "0.1", "--gamma2", "1,2", "--m", "5000", "--seed", "1"]);
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kappa,gamma2,rep,mu,sigma2,eta,iterations,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn prox_eval_satisfies_the_prox_equation() {
    let out = ok(&["prox-eval", "--link", "logistic", "--eta", "2", "--x", "-3,0.5,4"]);
    let v: Value = serde_json::from_slice(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let (x, z) = (r["x"].as_f64().unwrap(), r["prox"].as_f64().unwrap());
        let g = 1.0 / (1.0 + (-z).exp());
        assert!((z + 2.0 * g - x).abs() < 1e-10, "{r}");
    }
}
