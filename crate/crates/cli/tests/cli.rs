use std::path::Path;
use std::process::Command;

use latreg_cli::manifest::{files_on_disk, MANIFEST_FILE};
use latreg_cli::{cmd_report, cmd_run, RunConfig, RunStatus};

fn config(out: &Path, seeds: &[u64], benchmarks: bool) -> RunConfig {
    let mut cfg: RunConfig = serde_json::from_value(serde_json::json!({
        "data": {"synthetic": {"n": 100, "p": 16, "d_true": 2, "noise_sd": 0.5, "seed": 4,
            "subgroups": [{"size": 15, "affected_factor": 0, "slope_delta": 1.5}]}},
        "train": {"epochs": 15, "d": 2},
        "output_dir": out,
    }))
    .unwrap();
    cfg.seeds = seeds.to_vec();
    cfg.benchmarks.enabled = benchmarks;
    cfg
}

fn file_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    files_on_disk(root)
        .unwrap()
        .into_iter()
        .map(|f| {
            let b = std::fs::read(root.join(&f)).unwrap();
            (f, b)
        })
        .collect()
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_run(&config(&dir.path().join("a"), &[0, 1], true), false).unwrap();
    let b = cmd_run(&config(&dir.path().join("b"), &[0, 1], true), false).unwrap();
    assert_eq!(a.files, b.files);
    assert_eq!(file_bytes(&dir.path().join("a")), file_bytes(&dir.path().join("b")));
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    let m = cmd_run(&config(&root, &[3, 4], true), false).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, files_on_disk(&root).unwrap());
    assert!(root.join(MANIFEST_FILE).is_file());
    let rep = m.representative.unwrap();
    assert!([3, 4].contains(&rep.seed));
    assert_eq!(m.config.seeds, vec![3, 4]);
}

#[test]
fn fifteen_seeds_give_fifteen_models_and_one_stability_table() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<u64> = (0..15).collect();
    let m = cmd_run(&config(&dir.path().join("run"), &seeds, false), false).unwrap();
    let models = m
        .files
        .iter()
        .filter(|f| f.path.starts_with("models/") && f.path.ends_with(".json"))
        .count();
    assert_eq!(models, 15);
    assert_eq!(m.files.iter().filter(|f| f.path.starts_with("stability")).count(), 2);
    assert!(m.file("stability.csv").is_some());
}

#[test]
fn disabled_benchmarks_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_run(&config(&dir.path().join("run"), &[0], false), false).unwrap();
    assert!(m
        .files
        .iter()
        .all(|f| !f.path.starts_with("benchmarks") && !f.path.starts_with("stepwise/")));
    let s = cmd_report(&dir.path().join("run")).unwrap();
    assert!(s.benchmarks.is_empty());
    assert!(s.stability.is_none());
}

#[test]
fn report_lists_subgroups_and_orders_benchmarks() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    cmd_run(&config(&root, &[0, 1], true), false).unwrap();
    let s = cmd_report(&root).unwrap();
    let written: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(root.join("subgroups.json")).unwrap()).unwrap();
    assert_eq!(s.subgroups.len(), written.len());
    for (a, b) in s.subgroups.iter().zip(&written) {
        assert_eq!(a.size, b["members"].as_array().unwrap().len());
    }
    let order: Vec<&str> = s.benchmarks.iter().map(|b| b.method.as_str()).collect();
    assert_eq!(order, ["proposed", "plain_ae", "pca"]);
    assert_eq!(s.global_model.terms.len(), 3);
    assert_eq!(s.stability.unwrap().runs, 2);
}

#[test]
fn empty_subgroup_list_is_reported_empty() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    let mut cfg = config(&root, &[0], false);
    cfg.diagnostics.min_size = 10_000;
    cmd_run(&cfg, false).unwrap();
    let s = cmd_report(&root).unwrap();
    assert!(s.subgroups.is_empty());
    let json = serde_json::to_value(&s).unwrap();
    assert_eq!(json["subgroups"], serde_json::json!([]));
}

#[test]
fn report_enumerates_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    cmd_run(&config(&root, &[0], true), false).unwrap();
    std::fs::remove_file(root.join("global_model.csv")).unwrap();
    std::fs::remove_file(root.join("benchmarks.csv")).unwrap();
    let e = cmd_report(&root).unwrap_err().to_string();
    assert!(e.contains("global_model.csv") && e.contains("benchmarks.csv"), "{e}");
}

#[test]
fn failing_stage_persists_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "a,b,y\n1,2,3\n").unwrap();
    let root = dir.path().join("run");
    let cfg: RunConfig = serde_json::from_value(serde_json::json!({
        "data": {"csv": {"path": csv, "outcome": "y"}},
        "output_dir": root,
    }))
    .unwrap();
    let e = cmd_run(&cfg, false).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let m = latreg_cli::RunManifest::load(&root).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    let f = m.failure.unwrap();
    assert!(!f.stage.is_empty() && !f.message.is_empty());
}

fn latreg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_latreg")).args(args).output().unwrap()
}

#[test]
fn synth_binary_writes_header_plus_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    std::fs::write(&cfg, r#"{"n": 200, "p": 60, "d_true": 4, "noise_sd": 0.5, "seed": 2}"#).unwrap();
    let out = dir.path().to_str().unwrap();
    let c = cfg.to_str().unwrap();
    assert!(latreg(&["synth", "--config", c, "--out", out]).status.success());
    let first = std::fs::read(dir.path().join("cohort.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 201);
    assert!(dir.path().join("cohort.truth.json").is_file());
    assert!(latreg(&["synth", "--config", c, "--out", out]).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("cohort.csv")).unwrap());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"n": 10, "p": 8, "d_true": 2, "noise_sd": 0.5, "seed": 1,
            "subgroups": [{"size": 20, "affected_factor": 0, "slope_delta": 1}]}"#,
    )
    .unwrap();
    let o = latreg(&["synth", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size"));

    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "a,b\n1,2\n").unwrap();
    let run = dir.path().join("run.json");
    std::fs::write(
        &run,
        serde_json::json!({"data": {"csv": {"path": csv, "outcome": "y"}}, "output_dir": dir.path().join("o")})
            .to_string(),
    )
    .unwrap();
    let o = latreg(&["run", "--config", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage load"));

    let o = latreg(&["report", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir.path().join("ignored"), &[0, 1, 2], true);
    let path = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("flagged");
    let o = latreg(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--seeds",
        "7",
        "--epochs",
        "5",
        "--no-benchmarks",
        "--sequential",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("ignored").exists());
    let m = latreg_cli::RunManifest::load(&out).unwrap();
    assert_eq!(m.config.seeds, vec![7]);
    assert_eq!(m.config.train.epochs, 5);
    assert!(!m.config.benchmarks.enabled);
}
