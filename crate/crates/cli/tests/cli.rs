use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onco_cli::config::{config_hash, parse, serialize};
use onco_cli::output::CSV_HEADER;
use onco_core::scenario::{preset, PRESETS};

fn onco(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_onco"));
    cmd.args(args).env_remove("ONCO_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("ONCO_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_fast_writes_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = onco(
        &["run", "--preset", "fast", "--out", path(tmp.path())],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("fast");
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 2881);
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("basin = benign"));
    assert!(summary.contains("steady_state = pass"));
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let hash = config_hash(&preset("fast").unwrap());
    assert!(manifest.contains(&format!("config_hash = {hash}")));
    for key in ["csv = ", "summary = ", "config = "] {
        let line = manifest.lines().find(|l| l.starts_with(key)).unwrap();
        assert!(Path::new(&line[key.len()..]).exists(), "{line}");
    }
    assert_eq!(String::from_utf8(out.stdout).unwrap(), manifest);
}

#[test]
fn equilibria_lists_three_labelled_points() {
    let out = onco(&["equilibria", "--preset", "equilibria-calibrated"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (row, (x, label)) in
        rows.iter()
            .zip([(73.0, "stable"), (356.2, "saddle"), (737.3, "stable")])
    {
        let got: f64 = row[1].parse().unwrap();
        assert!((got - x).abs() < 0.5, "{row:?}");
        assert_eq!(row[4], label);
    }
}

#[test]
fn equilibria_of_table_values_fail_cleanly() {
    let out = onco(&["equilibria", "--preset", "table-verbatim"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error kind=model"));
}

#[test]
fn missing_config_exits_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("out");
    let out = onco(
        &["run", "--config", "missing.cfg", "--out", path(&root)],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error kind=config"));
    assert!(!root.exists());
}

#[test]
fn bad_config_and_usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "initial.x = 500\nwhatever = 1\n").unwrap();
    let out = onco(
        &["run", "--config", path(&cfg), "--out", path(tmp.path())],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("unknown key `whatever`"));
    assert_eq!(
        onco(&["run", "--preset", "nope"], Some(tmp.path()))
            .status
            .code(),
        Some(1)
    );
    assert_eq!(onco(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn abort_exits_two_and_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset("fast").unwrap();
    cfg.name = "overdose".to_string();
    cfg.controller_mode = onco_core::scenario::ControllerMode::OpenLoop;
    cfg.eta_x_assumed = 1e-4;
    cfg.eta_x_true = onco_core::disturbance::DisturbanceProfile::Constant(1.0);
    cfg.reference.ramp_time = 0.5;
    let file = tmp.path().join("overdose.cfg");
    fs::write(&file, serialize(&cfg)).unwrap();
    let out = onco(
        &["run", "--config", path(&file), "--out", path(tmp.path())],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error kind=abort"));
    let csv = fs::read_to_string(tmp.path().join("overdose/trajectory.csv")).unwrap();
    assert!(csv.lines().count() < 2882);
    let summary = fs::read_to_string(tmp.path().join("overdose/summary.txt")).unwrap();
    assert!(summary.contains("status = aborted"));
}

#[test]
fn csvs_are_reproducible_and_config_files_match_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(
        onco(&["run", "--preset", "mismatch", "--out", path(&a)], None)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        onco(&["run", "--preset", "mismatch"], Some(&b))
            .status
            .code(),
        Some(0)
    );
    // The config copy written next to the outputs reproduces the run.
    let copy = b.join("mismatch/config.cfg");
    assert_eq!(
        onco(&["run", "--config", path(&copy), "--out", path(&c)], None)
            .status
            .code(),
        Some(0)
    );
    let read = |root: &Path| fs::read(root.join("mismatch/trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn preset_configs_round_trip() {
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        assert_eq!(parse(&serialize(&cfg)).unwrap(), cfg, "{name}");
    }
}

#[test]
fn list_and_sweep() {
    let out = onco(&["list-presets"], None);
    let names: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(names, PRESETS);

    let tmp = tempfile::tempdir().unwrap();
    let out = onco(
        &[
            "sweep",
            "--preset",
            "fast",
            "--ramp",
            "5,10,20",
            "--max-total-u",
            "1.5",
        ],
        Some(tmp.path()),
    );
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("fast-sweep/ranking.csv")).unwrap();
    let first: Vec<String> = table
        .lines()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(first[1..], ["1,20", "2,10", "-,5"]);
}
