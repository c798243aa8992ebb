use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn matinar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matinar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = matinar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn sha256(file: &Path) -> String {
    format!("{:x}", Sha256::digest(fs::read(file).unwrap()))
}

fn simulate_a(dir: &Path, t: &str, seed: &str) -> String {
    ok(&[
        "simulate",
        "--scenario",
        "A",
        "--T",
        t,
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ]);
    path(dir, "series.csv")
}

#[test]
fn simulate_is_deterministic_and_sized() {
    let tmp = TempDir::new().unwrap();
    let (d1, d2, d3) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    simulate_a(&d1, "200", "42");
    simulate_a(&d2, "200", "42");
    simulate_a(&d3, "200", "43");
    let text = fs::read_to_string(d1.join("series.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 200 * 4);
    assert_eq!(
        sha256(&d1.join("series.csv")),
        sha256(&d2.join("series.csv"))
    );
    assert_ne!(
        sha256(&d1.join("series.csv")),
        sha256(&d3.join("series.csv"))
    );
    let report = json(&d1, "simulate.json");
    assert_eq!(report["meta"]["seed"], 42);
    assert_eq!(
        report["meta"]["config_hash"],
        json(&d2, "simulate.json")["meta"]["config_hash"]
    );
    assert!((report["spectral_radius"].as_f64().unwrap() - 0.7589).abs() < 1e-4);
}

#[test]
fn nonstationary_params_are_refused_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let params = tmp.path().join("unit.json");
    fs::write(
        &params,
        r#"{"m":1,"n":1,"p":1,"A":[[[1.0]]],"B":[[[1.0]]],"Lambda":[[1.0]]}"#,
    )
    .unwrap();
    let p = params.to_str().unwrap();
    let out_dir = path(tmp.path(), "out");
    let refused = matinar(&[
        "simulate", "--params", p, "--T", "1000", "--seed", "1", "--out", &out_dir,
    ]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("not stationary"));
    ok(&[
        "simulate",
        "--params",
        p,
        "--T",
        "50",
        "--seed",
        "1",
        "--force-nonstationary",
        "--out",
        &out_dir,
    ]);
}

#[test]
fn simulated_csv_survives_ingestion_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate_a(tmp.path(), "120", "5");
    let series = matinar::io::read_series_file(Path::new(&csv)).unwrap();
    let again = matinar::io::series_to_csv_string(&series).unwrap();
    assert_eq!(again, fs::read_to_string(&csv).unwrap());
}

#[test]
fn icls_fit_recovers_scenario_a_within_three_standard_errors() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate_a(&tmp.path().join("sim"), "1000", "7");
    let fit_dir = tmp.path().join("fit");
    ok(&[
        "fit",
        "--data",
        &csv,
        "--p",
        "1",
        "--method",
        "icls",
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    let fit = json(&fit_dir, "fit.json");
    let conv = &fit["convergence"];
    assert_eq!(conv["converged"], true);
    let trace: Vec<f64> = conv["objective_trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let truth = matinar::scenario::scenario_a();
    let est = &fit["estimates"]["A"][0];
    let se = &fit["standard_errors"]["a"][0];
    for i in 0..2 {
        for j in 0..2 {
            let err = (est[i][j].as_f64().unwrap() - truth.a()[0][(i, j)]).abs();
            assert!(
                err < 3.0 * se[i][j].as_f64().unwrap(),
                "A[{i},{j}] off by {err}"
            );
        }
    }
    // params.json feeds the forecasting commands
    let params = matinar::io::read_params_file(&fit_dir.join("params.json")).unwrap();
    assert_eq!(params.p(), 1);
}

#[test]
fn malformed_csv_names_the_missing_cell() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(&csv, "t,row,col,value\n1,1,1,3\n1,1,2,\n").unwrap();
    let out = matinar(&[
        "fit",
        "--data",
        csv.to_str().unwrap(),
        "--p",
        "1",
        "--out",
        &path(tmp.path(), "o"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 3") && err.contains("row=1, col=2"),
        "{err}"
    );
}

#[test]
fn invalid_requests_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate_a(&tmp.path().join("sim"), "30", "1");
    let o = path(tmp.path(), "o");
    assert_eq!(
        matinar(&["fit", "--data", &csv, "--p", "1", "--method", "ols", "--out", &o])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        matinar(&["fit", "--data", &csv, "--p", "8", "--out", &o])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        matinar(&[
            "simulate",
            "--scenario",
            "B",
            "--T",
            "10",
            "--seed",
            "1",
            "--out",
            &o
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        matinar(&[
            "replicate",
            "--scenario",
            "A",
            "--reps",
            "1",
            "--T",
            "100",
            "--seed",
            "1",
            "--out",
            &o
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        matinar(&["simulate", "--T", "10", "--seed", "1", "--out", &o])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn order_selection_curve_and_choice() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate_a(&tmp.path().join("sim"), "1000", "11");
    let one = tmp.path().join("one");
    ok(&[
        "select-order",
        "--data",
        &csv,
        "--p-bar",
        "1",
        "--out",
        one.to_str().unwrap(),
    ]);
    assert_eq!(json(&one, "order.json")["selection"]["p_hat"], 1);
    assert_eq!(
        fs::read_to_string(one.join("ic_curve.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    let four = tmp.path().join("four");
    ok(&[
        "select-order",
        "--data",
        &csv,
        "--p-bar",
        "4",
        "--method",
        "proj",
        "--out",
        four.to_str().unwrap(),
    ]);
    assert_eq!(json(&four, "order.json")["selection"]["p_hat"], 1);
    assert_eq!(
        fs::read_to_string(four.join("ic_curve.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn train_test_workflow_produces_consistent_metrics() {
    let tmp = TempDir::new().unwrap();
    let csv = simulate_a(&tmp.path().join("sim"), "300", "3");
    let fit_dir = tmp.path().join("fit");
    ok(&[
        "fit",
        "--data",
        &csv,
        "--p",
        "1",
        "--train",
        "280",
        "--method",
        "proj",
        "--bootstrap-reps",
        "20",
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    let params = path(&fit_dir, "params.json");
    let diag = tmp.path().join("diag");
    ok(&[
        "diagnose",
        "--params",
        &params,
        "--data",
        &csv,
        "--train",
        "280",
        "--horizon",
        "20",
        "--out",
        diag.to_str().unwrap(),
    ]);
    let report = json(&diag, "diagnostics.json");
    let delays: Vec<u64> = report["portmanteau"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["delay"].as_u64().unwrap())
        .collect();
    assert_eq!(delays, (1..=24).collect::<Vec<_>>());
    let cmpe = fs::read_to_string(diag.join("cmpe.csv")).unwrap();
    let lines: Vec<&str> = cmpe.lines().collect();
    assert_eq!(lines.len(), 21);
    let last: f64 = lines[20].split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - report["mspe"].as_f64().unwrap()).abs() < 1e-12);

    let fc = tmp.path().join("fc");
    ok(&[
        "forecast",
        "--params",
        &params,
        "--data",
        &csv,
        "--train",
        "280",
        "--horizon",
        "20",
        "--rounding",
        "floor",
        "--out",
        fc.to_str().unwrap(),
    ]);
    let forecast = json(&fc, "forecast.json");
    assert_eq!(forecast["forecast"]["means"].as_array().unwrap().len(), 20);
    assert_eq!(
        forecast["forecast"]["rounded"].as_array().unwrap().len(),
        20
    );
    assert!((forecast["mspe"].as_f64().unwrap() - report["mspe"].as_f64().unwrap()).abs() < 1e-12);

    // metrics past the end of the data are an input error
    let out = matinar(&[
        "diagnose",
        "--params",
        &params,
        "--data",
        &csv,
        "--train",
        "290",
        "--horizon",
        "20",
        "--out",
        diag.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replication_reports_do_not_depend_on_worker_count() {
    let tmp = TempDir::new().unwrap();
    let (d1, d2) = (tmp.path().join("j1"), tmp.path().join("j2"));
    for (dir, jobs) in [(&d1, "1"), (&d2, "2")] {
        ok(&[
            "replicate",
            "--jobs",
            jobs,
            "--scenario",
            "A",
            "--reps",
            "6",
            "--T",
            "150,300",
            "--seed",
            "9",
            "--method",
            "proj,icls",
            "--bootstrap-reps",
            "10",
            "--burn-in",
            "50",
            "--out",
            dir.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        sha256(&d1.join("replicate.json")),
        sha256(&d2.join("replicate.json"))
    );
    let report = json(&d1, "replicate.json");
    assert_eq!(report["report"]["cells"].as_array().unwrap().len(), 4);
    assert!(fs::read_to_string(d1.join("replicate.txt"))
        .unwrap()
        .contains("A1[1,1]"));

    let order = tmp.path().join("order");
    ok(&[
        "replicate",
        "--order-study",
        "--scenario",
        "random-p1",
        "--reps",
        "4",
        "--T",
        "200",
        "--seed",
        "2",
        "--method",
        "proj",
        "--p-bar",
        "3",
        "--out",
        order.to_str().unwrap(),
    ]);
    let rows = &json(&order, "replicate.json")["report"]["rows"];
    let r = &rows[0];
    let total =
        r["correct"].as_f64().unwrap() + r["over"].as_f64().unwrap() + r["under"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}
