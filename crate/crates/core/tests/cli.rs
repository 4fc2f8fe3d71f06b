use std::path::Path;
use std::process::{Command, Output};

use cpscan::io::{parse_curve, read_json, DatasetManifest};
use cpscan::metrics::{evaluate, EvalReport};
use cpscan::pipeline::DetectionReport;
use serde_json::{json, Value};

fn cpscan<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpscan"))
        .args(args)
        .env_remove("CPSCAN_WORKERS")
        .output()
        .expect("binary runs")
}

fn write(path: &Path, value: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_generator() -> Value {
    json!({
        "family": "mlp_piecewise",
        "p": 3,
        "h": 2,
        "n_change_points": 1,
        "gap_range": [100, 120],
        "sigma": 0.2,
        "seed": 8,
        "mlp": {"signal_target": 50.0}
    })
}

const FAST: [&str; 8] = ["--t0", "20", "--hidden", "4", "--max-epochs", "40", "--stride", "2"];

#[test]
fn generate_detect_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("gen.json");
    write(&spec, &small_generator());
    let data_dir = dir.path().join("data");
    let out = cpscan(&["generate", "--spec", p(&spec), "--out", p(&data_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["dataset.csv", "manifest.json", "run_manifest.json"] {
        assert!(data_dir.join(f).exists(), "{f}");
    }
    let manifest: DatasetManifest = read_json(&data_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.tau.len(), 1);

    let det_dir = dir.path().join("det");
    let data_csv = data_dir.join("dataset.csv");
    let manifest_path = data_dir.join("manifest.json");
    let mut args = vec!["detect", "--data", p(&data_csv), "--truth", p(&manifest_path), "--out", p(&det_dir)];
    args.extend(FAST);
    let out = cpscan(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: DetectionReport = read_json(&det_dir.join("detection.json")).unwrap();
    assert_eq!((report.t1, report.t2, report.t3), (20, 20, 40));

    // The curve CSV and JSON carry identical values.
    let csv = std::fs::read_to_string(det_dir.join("curve.csv")).unwrap();
    let curve = parse_curve(&csv, 20, 20, 2).unwrap();
    let cj: Value = read_json(&det_dir.join("curve.json")).unwrap();
    let e: Vec<f64> = serde_json::from_value(cj["e"].clone()).unwrap();
    assert_eq!(curve.e_values, e);

    // Evaluating the emitted files reproduces the in-process report.
    let eval_path = dir.path().join("eval.json");
    let out = cpscan(&[
        "evaluate",
        "--truth",
        p(&data_dir.join("manifest.json")),
        "--estimates",
        p(&det_dir.join("detection.json")),
        "--out",
        p(&eval_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let from_cli: EvalReport = read_json(&eval_path).unwrap();
    assert_eq!(from_cli, evaluate(&manifest.tau, &report.change_points, report.t3).unwrap());
}

#[test]
fn detect_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("gen.json");
    write(&spec, &small_generator());
    let data_dir = dir.path().join("data");
    assert!(cpscan(&["generate", "--spec", p(&spec), "--out", p(&data_dir)]).status.success());
    let data_csv = data_dir.join("dataset.csv");
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let det = dir.path().join(format!("det{w}"));
        let mut args = vec!["detect", "--data", p(&data_csv), "--workers", w, "--out", p(&det)];
        args.extend(FAST);
        let out = cpscan(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push((
            std::fs::read(det.join("detection.json")).unwrap(),
            std::fs::read(det.join("curve.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn evaluate_worked_example_and_plain_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    write(&truth, &json!({"tau": [100]}));
    let est = dir.path().join("est.txt");
    std::fs::write(&est, "90\n110\n").unwrap();
    let out = cpscan(&["evaluate", "--truth", p(&truth), "--estimates", p(&est), "--margin", "15"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((r.hausdorff_sum, r.hausdorff_prod, r.mean_distance), (20.0, 100.0, 10.0));
    assert_eq!(r.margin, 15);

    std::fs::write(&est, "").unwrap();
    let out = cpscan(&["evaluate", "--truth", p(&truth), "--estimates", p(&est), "--margin", "15"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mean_distance"], "inf");
    assert_eq!(v["recall"], 0.0);

    // Plain estimates have no T3 to fall back on.
    let out = cpscan(&["evaluate", "--truth", p(&truth), "--estimates", p(&est)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn errors_are_single_lines_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "x0,y0\n1,2\n3,oops\n").unwrap();
    let missing = dir.path().join("nope.csv");
    let out_dir = dir.path().join("o");
    let cases = [
        vec!["detect", "--data", p(&missing), "--out", p(&out_dir)],
        vec!["detect", "--data", p(&bad_csv), "--out", p(&out_dir)],
        vec!["detect", "--data", p(&bad_csv), "--out", p(&out_dir), "--pi", "sometimes"],
        vec!["frobnicate"],
        vec!["generate", "--spec", p(&missing), "--out", p(&out_dir)],
    ];
    for args in cases {
        let out = cpscan(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error["), "{args:?}: {err}");
    }
    let out = cpscan(&["--help"]);
    assert!(out.status.success());
}

#[test]
fn t0_flag_sets_all_windows() {
    let dir = tempfile::tempdir().unwrap();
    let csv: String = std::iter::once("y0\n".to_string())
        .chain((0..1138).map(|i| format!("{}\n", if i < 569 { 0.0 } else { 1.0 } + 0.01 * ((i * 7 % 13) as f64))))
        .collect();
    let data = dir.path().join("series.csv");
    std::fs::write(&data, csv).unwrap();
    let out_dir = dir.path().join("o");
    let out = cpscan(&[
        "detect", "--data", p(&data), "--t0", "30", "--hidden", "2", "--max-epochs", "5", "--stride", "8", "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run: Value = read_json(&out_dir.join("run_manifest.json")).unwrap();
    assert_eq!(run["windows"], json!({"T1": 30, "T2": 30, "T3": 60}));
    let report: Value = read_json(&out_dir.join("detection.json")).unwrap();
    assert_eq!((&report["T1"], &report["T2"], &report["T3"]), (&json!(30), &json!(30), &json!(60)));
}

#[test]
fn experiment_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.json");
    write(
        &spec,
        &json!({
            "repetitions": 2,
            "seed": 1,
            "generator": small_generator(),
            "detection": {"t0": 20, "hidden": [4], "stride": 2, "train": {"max_epochs": 30}},
            "sigmas": [0.2, 1.0]
        }),
    );
    let out_dir = dir.path().join("exp");
    let out = cpscan(&["experiment", "--spec", p(&spec), "--out", p(&out_dir), "--workers", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for s in 0..2 {
        for r in 0..2 {
            assert!(out_dir.join(format!("runs/s{s}_r{r}/detection.json")).exists());
        }
    }
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 1 + 4 + 2);
    assert_eq!(rows.iter().filter(|r| r.starts_with("aggregate")).count(), 2);
}
