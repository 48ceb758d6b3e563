//! End-to-end checks of the binary: exit codes, output files, reproducibility
//! from the emitted metadata.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polynet::data::gen_teacher_p2k;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polynet"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polynet_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn dataset_csv(dir: &Path, seed: u64) -> PathBuf {
    let (data, _) = gen_teacher_p2k::<f64>(4, 2, 200, seed, 0.0).unwrap();
    let path = dir.join("data.csv");
    data.save_csv(&path).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

/// Value columns of a trace CSV (wall-clock excluded).
fn trace_values(path: &Path) -> Vec<(String, String, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let mut cells = line.split(',');
            (
                cells.next().unwrap().to_string(),
                cells.next().unwrap().to_string(),
                cells.next().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn missing_dataset_exits_2_and_names_the_path() {
    let dir = workdir("missing_data");
    let out = run(bin()
        .args(["train", "geco2", "--data", "no_such_file.csv", "--out"])
        .arg(dir.join("run")));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_file.csv"), "stderr: {stderr}");
}

#[test]
fn bad_flag_value_exits_2() {
    let dir = workdir("bad_flag");
    let data = dataset_csv(&dir, 1);
    let out = run(bin()
        .args(["train", "geco2", "--loss", "hinge", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.join("run")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geco2_training_writes_outputs_and_reproduces_from_metadata() {
    let dir = workdir("geco2_repro");
    let data = dataset_csv(&dir, 7);
    let run1 = dir.join("run1");
    let out = run(bin()
        .args(["train", "geco2", "--r", "5", "--seed", "9", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run1));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["model.json", "trace.csv", "metadata.json"] {
        assert!(run1.join(file).exists(), "missing {file}");
    }
    // Metadata records the theorem budget.
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run1.join("metadata.json")).unwrap())
            .unwrap();
    assert!(meta["theorem_budget"].as_f64().unwrap() > 0.0);
    assert_eq!(meta["r"].as_u64(), Some(5));

    // Re-running from the metadata file reproduces the value columns exactly.
    let run2 = dir.join("run2");
    let out2 = run(bin()
        .args(["train", "geco2", "--config"])
        .arg(run1.join("metadata.json"))
        .arg("--out")
        .arg(&run2));
    assert!(out2.status.success());
    assert_eq!(
        trace_values(&run1.join("trace.csv")),
        trace_values(&run2.join("trace.csv"))
    );
}

#[test]
fn cli_flags_override_config_values() {
    let dir = workdir("override");
    let data = dataset_csv(&dir, 3);
    let run1 = dir.join("run1");
    assert!(run(bin()
        .args(["train", "geco2", "--r", "4", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run1))
    .status
    .success());
    let run2 = dir.join("run2");
    assert!(run(bin()
        .args(["train", "geco2", "--r", "2", "--config"])
        .arg(run1.join("metadata.json"))
        .arg("--out")
        .arg(&run2))
    .status
    .success());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run2.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["r"].as_u64(), Some(2));
    assert_eq!(trace_values(&run2.join("trace.csv")).len(), 3); // iterations 0..=2
}

#[test]
fn geco3_trace_has_degree_column() {
    let dir = workdir("geco3_degree");
    let data = dataset_csv(&dir, 11);
    let run1 = dir.join("run");
    let out = run(bin()
        .args(["train", "geco3", "--r", "3", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run1));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(run1.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,risk,eig_abs,seconds,degree\n"));
}

#[test]
fn sgd_zero_iterations_yields_empty_trace() {
    let dir = workdir("sgd_zero");
    let data = dataset_csv(&dir, 5);
    let run1 = dir.join("run");
    let out = run(bin()
        .args([
            "train",
            "sgd",
            "--iterations",
            "0",
            "--width",
            "4",
            "--data",
        ])
        .arg(&data)
        .arg("--out")
        .arg(&run1));
    assert!(out.status.success());
    let trace = std::fs::read_to_string(run1.join("trace.csv")).unwrap();
    assert_eq!(trace, "iteration,error\n");
    assert!(run1.join("model.json").exists());
}

#[test]
fn tikz_emit_writes_coordinate_pairs() {
    let dir = workdir("tikz");
    let data = dataset_csv(&dir, 13);
    let run1 = dir.join("run");
    assert!(run(bin()
        .args(["train", "geco2", "--r", "3", "--emit", "tikz-coords", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run1))
    .status
    .success());
    let coords = std::fs::read_to_string(run1.join("trace.txt")).unwrap();
    assert!(coords.starts_with("(0,"), "coords: {coords}");
    assert!(coords.trim_end().split(' ').count() >= 4);
    assert!(coords.trim_end().split(' ').all(|tok| tok.starts_with('(') && tok.ends_with(')')));
}

#[test]
fn eval_reports_risk_for_trained_model() {
    let dir = workdir("eval");
    let data = dataset_csv(&dir, 17);
    let run1 = dir.join("run");
    assert!(run(bin()
        .args(["train", "geco2", "--r", "6", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run1))
    .status
    .success());
    let out = run(bin()
        .args(["eval", "--model"])
        .arg(run1.join("model.json"))
        .arg("--data")
        .arg(&data));
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("eval prints JSON");
    assert!(report["risk"].as_f64().unwrap() < 0.05);
}

#[test]
fn experiment_overspec_reports_full_rank() {
    let dir = workdir("exp_overspec");
    let out = run(bin()
        .args([
            "experiment",
            "overspec",
            "--d",
            "10",
            "--m",
            "30",
            "--n-hidden",
            "30",
            "--seed",
            "1",
            "--out",
        ])
        .arg(dir.join("exp")));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("exp").join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["rank"].as_u64(), Some(30));
    assert!(report["risk"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn experiment_tensor_ratio_reports_success_fraction() {
    let dir = workdir("exp_ratio");
    let out = run(bin()
        .args([
            "experiment",
            "tensor-ratio",
            "--d",
            "2",
            "--trials",
            "25",
            "--seed",
            "2",
            "--out",
        ])
        .arg(dir.join("exp")));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("exp").join("report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["success_fraction"].as_f64().unwrap() >= 0.85);
    assert!(dir.join("exp").join("trials.csv").exists());
}

#[test]
fn experiment_sigmoid_approx_meets_target() {
    let dir = workdir("exp_sigmoid");
    let out = run(bin()
        .args([
            "experiment",
            "sigmoid-approx",
            "--epsilon",
            "0.1",
            "--l-bound",
            "3",
            "--out",
        ])
        .arg(dir.join("exp")));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("exp").join("report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["grid_sup_error"].as_f64().unwrap() <= 0.1);
    assert_eq!(report["passed"].as_bool(), Some(true));
    // The approx document itself carries the canonical four fields.
    let approx: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("exp").join("approx.json")).unwrap(),
    )
    .unwrap();
    for key in ["L", "epsilon", "degree", "coefficients"] {
        assert!(approx.get(key).is_some(), "approx.json missing {key}");
    }
}

#[test]
fn approx_command_reports_bounds() {
    let dir = workdir("approx_cmd");
    let out = run(bin()
        .args([
            "approx",
            "--epsilon",
            "0.5",
            "--l-bound",
            "3",
            "--t",
            "2",
            "--out",
        ])
        .arg(dir.join("approx")));
    assert!(out.status.success());
    let bounds: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("approx").join("bounds.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(bounds["degree"].as_u64(), Some(188));
    assert_eq!(bounds["b_t"].as_u64(), Some(12));
    assert_eq!(bounds["b_n"].as_u64(), Some(13969));
}

#[test]
fn numerical_failure_exits_1() {
    let dir = workdir("divergence");
    let data = dataset_csv(&dir, 29);
    let out = run(bin()
        .args([
            "train",
            "sgd",
            "--learning-rate",
            "50",
            "--iterations",
            "3000",
            "--width",
            "8",
            "--eval-every",
            "10",
            "--data",
        ])
        .arg(&data)
        .arg("--out")
        .arg(dir.join("run")));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("numerical"), "stderr: {stderr}");
}

#[test]
fn standardize_flag_changes_the_trajectory() {
    let dir = workdir("standardize");
    let data = dataset_csv(&dir, 23);
    let plain = dir.join("plain");
    let scaled = dir.join("scaled");
    assert!(run(bin()
        .args(["train", "geco2", "--r", "3", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&plain))
    .status
    .success());
    assert!(run(bin()
        .args(["train", "geco2", "--r", "3", "--standardize", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&scaled))
    .status
    .success());
    assert_ne!(
        trace_values(&plain.join("trace.csv")),
        trace_values(&scaled.join("trace.csv"))
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scaled.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["standardize"].as_bool(), Some(true));
}
