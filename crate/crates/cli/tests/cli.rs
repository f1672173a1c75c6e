use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Out {
    code: i32,
    report: Option<Value>,
    text: String,
    stderr: String,
}

fn pmcg(dir: &Path, args: &[&str]) -> Out {
    let report = dir.join("report.json");
    let _ = std::fs::remove_file(&report);
    let out = Command::new(env!("CARGO_BIN_EXE_pmcg"))
        .args(args)
        .arg("--out-report")
        .arg(&report)
        .current_dir(dir)
        .output()
        .unwrap();
    let text = std::fs::read_to_string(&report).unwrap_or_default();
    Out {
        code: out.status.code().unwrap(),
        report: serde_json::from_str(&text).ok(),
        text,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn cfg(name: &str) -> String {
    configs().join(format!("{name}.json")).display().to_string()
}

const SMALL_TORUS: &str = "grid.shape=[16,16]";

#[test]
fn solve_writes_report_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("u.csv");
    let c = cfg("torus-sine");
    let out = pmcg(
        dir.path(),
        &[
            "solve",
            "--config",
            &c,
            "--override",
            SMALL_TORUS,
            "--out-field",
            field.to_str().unwrap(),
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r = out.report.unwrap();
    assert_eq!(r["converged"], Value::Bool(true));
    assert!(r["final_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["version"], pmcgraph::VERSION);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let u = pmcgraph::ScalarField::from_csv(&std::fs::read_to_string(&field).unwrap()).unwrap();
    assert_eq!(u.grid().shape(), vec![16, 16]);
    assert!(u.min() >= 0.25 - 1e-9 && u.max() <= 0.25 + std::f64::consts::PI + 1e-9);
}

#[test]
fn floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("warped-cone");
    let out = pmcg(
        dir.path(),
        &["reparam", "--config", &c, "--override", "samples=5"],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.text.contains("\"samples\": 5,"));
    assert!(out.text.contains("2.7182818284590451e0"), "{}", out.text);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("quasi-linear");
    let args = [
        "solve",
        "--config",
        &c,
        "--override",
        SMALL_TORUS,
        "--out-field",
        "v.csv",
    ];
    let a = pmcg(dir.path(), &args);
    let fa = std::fs::read(dir.path().join("v.csv")).unwrap();
    let b = pmcg(dir.path(), &args);
    let fb = std::fs::read(dir.path().join("v.csv")).unwrap();
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.text, b.text);
    assert_eq!(fa, fb);
}

#[test]
fn quasi_report_carries_the_tilt_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("quasi");
    let out = pmcg(
        dir.path(),
        &["solve", "--config", &c, "--override", SMALL_TORUS],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r = out.report.unwrap();
    let q = &r["quasi"];
    assert!(q["min_theta"].as_f64().unwrap() > 0.9);
    assert_eq!(q["graphical"], Value::Bool(true));
    assert!(q["refined_min_theta"].is_number());
    assert!(r["min_theta"].is_number());
}

#[test]
fn misordered_barriers_fail_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("cap");
    let out = pmcg(
        dir.path(),
        &[
            "check-barrier",
            "--config",
            &c,
            "--override",
            "barrier.u1=2",
        ],
    );
    assert_eq!(out.code, 1);
    let r = out.report.unwrap();
    assert_eq!(r["pass"], Value::Bool(false));
    assert_eq!(r["violating_node"]["index"], serde_json::json!([1, 1]));
    assert_eq!(r["status"], "check_failed");
}

#[test]
fn barrier_check_passes_on_shipped_configs() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "cap",
        "catenoid",
        "torus-sine",
        "horosphere",
        "quasi",
        "from-phi",
    ] {
        let c = cfg(name);
        let out = pmcg(dir.path(), &["check-barrier", "--config", &c]);
        assert_eq!(out.code, 0, "{name}: {}", out.text);
    }
}

#[test]
fn failed_solve_keeps_history_and_best_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("quasi-linear");
    let out = pmcg(
        dir.path(),
        &[
            "solve",
            "--config",
            &c,
            "--override",
            SMALL_TORUS,
            "--override",
            "solver.max_outer=2",
        ],
    );
    assert_eq!(out.code, 3);
    let r = out.report.unwrap();
    assert_eq!(r["status"], "solver_failure");
    assert!(!r["residual_history"].as_array().unwrap().is_empty());
    let best = r["best_iterate_path"].as_str().unwrap();
    assert!(Path::new(best).exists() || dir.path().join(best).exists());
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("torus-sine");
    for o in [
        "pmc.h1=-z",
        "barrier.u0=y1",
        "solver.max_outer=0",
        "grid.topology=[\"periodic\"]",
        "bogus=1",
    ] {
        let out = pmcg(dir.path(), &["solve", "--config", &c, "--override", o]);
        assert_eq!(out.code, 2, "{o}");
        assert!(out.stderr.contains("error"), "{o}");
    }
    let out = pmcg(dir.path(), &["solve", "--config", "missing.json"]);
    assert_eq!(out.code, 2);
    let out = pmcg(dir.path(), &["reparam", "--config", &c]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("warped"));
}

#[test]
fn unwritable_report_path_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pmcg"))
        .args(["reparam", "--config", &cfg("warped-cone"), "--out-report"])
        .arg(blocker.join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monotone_check_reports_the_worst_sample() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("torus-sine");
    let out = pmcg(
        dir.path(),
        &["check-monotone", "--config", &c, "--override", SMALL_TORUS],
    );
    assert_eq!(out.code, 1);
    let r = out.report.unwrap();
    assert!(r["worst_value"].as_f64().unwrap() > 0.0);
    assert_eq!(r["checked"], "dH/dz");
    let out = pmcg(
        dir.path(),
        &[
            "check-monotone",
            "--config",
            &c,
            "--override",
            "pmc.expr=-z",
        ],
    );
    assert_eq!(out.code, 0);
}

#[test]
fn transform_tabulates_the_product_form() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("horosphere");
    let out = pmcg(
        dir.path(),
        &[
            "transform",
            "--config",
            &c,
            "--override",
            "samples=3",
            "--out-field",
            "t.csv",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,z,y1,y2,t,h,h_prime");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        // f = -ln r, n = 2: H' = H / z + 2 t / z
        let expect = (v[6] + 2.0 * v[5]) / v[2];
        assert!(
            (v[7] - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
            "{line}"
        );
    }
}

#[test]
fn eval_residual_of_a_solution_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("cap");
    let out = pmcg(
        dir.path(),
        &["solve", "--config", &c, "--out-field", "u.csv"],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let bound = out.report.unwrap()["residual_bound"].as_f64().unwrap();
    let out = pmcg(
        dir.path(),
        &[
            "eval-residual",
            "--config",
            &c,
            "--override",
            "inputs.field=u.csv",
            "--out-field",
            "r.csv",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let sup = out.report.unwrap()["interior_sup"].as_f64().unwrap();
    assert!(sup <= bound, "{sup} > {bound}");
    assert!(dir.path().join("r.csv").exists());
}

#[test]
fn diagnose_reports_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("catenoid");
    let out = pmcg(
        dir.path(),
        &[
            "diagnose",
            "--config",
            &c,
            "--override",
            "grid.shape=[9,9]",
            "--levels",
            "3",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r = out.report.unwrap();
    let levels = r["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    assert_eq!(levels[2]["shape"], serde_json::json!([33, 33]));
    assert_eq!(r["suspected_non_graphical"], Value::Bool(false));
}
