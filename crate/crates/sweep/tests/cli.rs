use std::fs;
use std::path::Path;
use std::process::Command;

fn kickmap(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kickmap")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn one_cell_sweep_at_full_smearing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        r#"{"a_grid": {"values": [0.3]}, "L_grid": [10], "eps_rule": {"constant": 0.5},
            "estimator": {"n_steps": 100000, "burn_in": 1000, "n_replicas": 4, "n_cells": 1024}}"#,
    );
    let (code, _, err) = kickmap(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "42"]);
    assert_eq!(code, 0, "{err}");
    let mut rd = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let h = rd.headers().unwrap().clone();
    let row = rd.records().next().unwrap().unwrap();
    let col = |name: &str| row.get(h.iter().position(|c| c == name).unwrap()).unwrap().to_string();
    let q: f64 = col("lambda_quad").parse().unwrap();
    assert!((q - 5f64.ln()).abs() <= 1e-3);
    assert_eq!(col("seed"), "42");
    assert_eq!(col("status"), "ok");
    assert_eq!(col("in_A_L"), "");
    for f in ["summary.json", "timings.csv", "plotdata/lambda_vs_a.csv", "plotdata/atlas.csv", "plotdata/density_cell0.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let dens = read_rows(&out.join("plotdata/density_cell0.csv"));
    assert_eq!(dens.len(), 1024);
    assert_eq!(&dens[0][2], "1");
}

#[test]
fn plotdata_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        r#"{"a_grid": {"count": 2}, "L_grid": [1000], "eps_rule": "schedule",
            "estimator": {"monte_carlo": false, "n_cells": 512, "density_profiles": false}}"#,
    );
    let (code, _, err) = kickmap(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let header = |f: &str| csv::Reader::from_path(out.join(f)).unwrap().headers().unwrap().clone();
    assert_eq!(header("plotdata/lambda_vs_a.csv"), vec!["a", "L", "lambda_over_logL", "in_A_L"]);
    assert_eq!(header("plotdata/atlas.csv"), vec!["L", "measure_A", "K1", "K2", "eps0"]);
    assert!(!out.join("plotdata/density_cell0.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let level = &summary["levels"][0];
    assert!(level["measure_a"].as_f64().unwrap() > 0.5);
    assert!(level["min_lambda_over_log_l"].as_f64().unwrap() <= level["mean_lambda_over_log_l"].as_f64().unwrap());
}

#[test]
fn failing_cells_do_not_abort_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        r#"{"a_grid": {"count": 3}, "L_grid": [10], "eps_rule": {"constant": 0.05},
            "estimator": {"n_steps": 10000, "burn_in": 100, "n_replicas": 2, "n_cells": 256, "max_iter": 1}}"#,
    );
    let (code, ..) = kickmap(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let rows = read_rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(&r[12], "NoConvergence");
        assert!(r[5].parse::<f64>().is_ok(), "Monte Carlo column lost: {r:?}");
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"a_grid": {"values": []}, "L_grid": [10], "eps_rule": {"constant": 0.6}}"#);
    let (code, _, err) = kickmap(&["validate", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("a_grid is empty") && err.contains("outside (0, 1/2]"), "{err}");
    let (code, ..) = kickmap(&["sweep", "--config", &cfg]);
    assert_eq!(code, 1);
    let (code, ..) = kickmap(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 1);
    let (code, ..) = kickmap(&["no-such-command"]);
    assert_eq!(code, 1);
    let (code, ..) = kickmap(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn validate_warns_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"a_grid": {"count": 8}, "L_grid": [1000], "eps_rule": {"constant": 0.0002},
        "estimator": {"quadrature": false}}"#);
    let (code, stdout, err) = kickmap(&["validate", "--config", &cfg]);
    assert_eq!(code, 0);
    assert!(err.contains("warning") && err.contains("b_2/2"), "{err}");
    assert!(stdout.contains("8 cells"));
}

#[test]
fn sink_suite_writes_certificate_and_contracting_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = write_config(
        dir.path(),
        r#"{"a_grid": {"count": 1}, "L_grid": [1000], "eps_rule": "schedule", "estimator": {"n_steps": 100000, "burn_in": 0}}"#,
    );
    let (code, _, err) = kickmap(&["sink", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sink_L1000.json")).unwrap()).unwrap();
    for key in ["z", "a_z", "nu", "eps", "M", "L", "contraction", "trap_margin", "psi"] {
        assert!(cert.get(key).is_some(), "missing {key}");
    }
    let rows = read_rows(&out.join("sink.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(&r[6], "ok");
        assert!(r[5].parse::<f64>().unwrap() <= -std::f64::consts::LN_2);
    }
}

#[test]
fn sink_without_folds_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"a_grid": {"count": 1}, "L_grid": [0.5], "eps_rule": {"constant": 0.1},
        "estimator": {"quadrature": false}}"#);
    let out = dir.path().join("s");
    let (code, ..) = kickmap(&["sink", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(&read_rows(&out.join("sink.csv"))[0][6], "InvalidParameter");
}

#[test]
fn single_cell_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = out.to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"a_grid": {"count": 2}, "L_grid": [20, 1000], "eps_rule": {"constant": 0.05},
            "estimator": {"n_steps": 50000, "burn_in": 500, "n_replicas": 2, "n_cells": 512}}"#,
    );
    let (code, stdout, err) = kickmap(&["lyap", "--config", &cfg, "--out", o, "--cell", "1"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("lambda_mc") && stdout.contains("lambda_quad"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("lyap.json")).unwrap()).unwrap();
    assert_eq!(v["monte_carlo"]["a"], 0.5);
    assert!(v["jensen"]["pass"].as_bool().unwrap());

    let (code, _, err) = kickmap(&["density", "--config", &cfg, "--out", o, "--export"]);
    assert_eq!(code, 0, "{err}");
    let rows = read_rows(&out.join("density.csv"));
    assert_eq!(rows.len(), 512);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ulam.json")).unwrap()).unwrap();
    let nnz = side["nnz"].as_u64().unwrap();
    let bytes = fs::metadata(out.join("ulam.bin")).unwrap().len();
    assert_eq!(bytes, 16 + 8 * 513 + 12 * nnz);

    let (code, ..) = kickmap(&["lyap", "--config", &cfg, "--out", o, "--cell", "9"]);
    assert_eq!(code, 1);

    let (code, stdout, _) = kickmap(&["erg-check", "--config", &cfg, "--out", o]);
    assert_eq!(code, 0);
    assert!(stdout.contains("4 of 4"));

    let (code, ..) = kickmap(&["atlas", "--config", &cfg, "--out", o]);
    assert_eq!(code, 2, "L = 20 lies outside the schedule range");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("atlas.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["L"], 1000.0);
}
