//! End-to-end checks of the command layer: file outputs, exit-code paths,
//! comparisons, and determinism of the on-disk artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use ttra_cli::commands::{cmd_compare, cmd_run, cmd_sweep, RunArgs, SweepArgs};
use ttra_cli::output;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ttra_cli_{}_{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_args(out: PathBuf) -> RunArgs {
    RunArgs {
        config: None,
        controller: "proposed".into(),
        seed: Some(5),
        out: Some(out),
        slots: Some(100),
        admm_trace: false,
        dump_assignments: false,
        quiet: true,
    }
}

#[test]
fn run_writes_the_three_artifacts() {
    let dir = scratch("artifacts");
    cmd_run(&run_args(dir.clone())).unwrap();
    for file in ["slots.csv", "frames.csv", "summary.json"] {
        assert!(dir.join(file).is_file(), "{file} missing");
    }
    let slots = fs::read_to_string(dir.join("slots.csv")).unwrap();
    assert_eq!(slots.lines().count(), 101); // header + 100 slots
    let summary = output::read_summary(&dir.join("summary.json")).unwrap();
    assert_eq!(summary.controller, "proposed");
    assert_eq!(summary.config.seed, 5);
    assert_eq!(summary.audit_violations, 0);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn optional_dumps_are_written_on_request() {
    let dir = scratch("dumps");
    let mut args = run_args(dir.clone());
    args.admm_trace = true;
    args.dump_assignments = true;
    cmd_run(&args).unwrap();
    let trace = fs::read_to_string(dir.join("admm_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,"));
    let assignments = fs::read_to_string(dir.join("assignments.csv")).unwrap();
    // header + devices × slots rows
    assert_eq!(assignments.lines().count(), 1 + 5 * 100);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn summary_reparses_to_identical_aggregates() {
    let dir = scratch("roundtrip");
    cmd_run(&run_args(dir.clone())).unwrap();
    let path = dir.join("summary.json");
    let first = output::read_summary(&path).unwrap();
    output::write_summary(&path, &first).unwrap();
    let second = output::read_summary(&path).unwrap();
    assert_eq!(first, second);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn compare_reports_cost_reduction_between_controllers() {
    let dir = scratch("compare");
    let mut a = run_args(dir.join("proposed"));
    a.slots = Some(500);
    cmd_run(&a).unwrap();
    let mut b = run_args(dir.join("baseline2"));
    b.controller = "baseline2".into();
    b.slots = Some(500);
    cmd_run(&b).unwrap();
    cmd_compare("proposed", "baseline2", Some(&dir)).unwrap();
    let report = fs::read_to_string(dir.join("compare_proposed_vs_baseline2.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(value["cost_reduction_pct"].as_f64().unwrap() > 0.0);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn compare_without_runs_is_a_config_error() {
    let dir = scratch("compare_missing");
    let err = cmd_compare("proposed", "baseline2", Some(&dir)).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sweep_emits_a_joined_table() {
    let dir = scratch("sweep");
    cmd_sweep(&SweepArgs {
        config: None,
        v_grid: Some("10,100".into()),
        seeds: Some("1,2".into()),
        controllers: Some("proposed".into()),
        out: Some(dir.clone()),
        slots: Some(50),
    })
    .unwrap();
    let table = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5); // header + 2×2 runs
    assert!(dir.join("v10_seed1_proposed/summary.json").is_file());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn bad_inputs_exit_with_config_errors() {
    let dir = scratch("bad_inputs");

    let mut bad_controller = run_args(dir.clone());
    bad_controller.controller = "bogus".into();
    assert_eq!(cmd_run(&bad_controller).unwrap_err().exit_code(), 1);

    let cfg_path = dir.join("bad.cfg");
    fs::write(&cfg_path, "energy.battery_capacity_j = -5\n").unwrap();
    let mut bad_value = run_args(dir.clone());
    bad_value.config = Some(cfg_path.clone());
    let err = cmd_run(&bad_value).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.message().contains("battery_capacity"));

    fs::write(&cfg_path, "who.knows = 1\n").unwrap();
    let mut bad_key = run_args(dir.clone());
    bad_key.config = Some(cfg_path);
    let err = cmd_run(&bad_key).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.message().contains("line 1"));

    let mut bad_slots = run_args(dir.clone());
    bad_slots.slots = Some(7); // not a multiple of the frame size
    assert_eq!(cmd_run(&bad_slots).unwrap_err().exit_code(), 1);

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn binary_reports_usage_errors_as_config_errors() {
    let exe = env!("CARGO_BIN_EXE_ttra");
    let status = Command::new(exe)
        .args(["run", "--no-such-flag"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(exe).args(["--help"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn consecutive_runs_are_byte_identical() {
    let base = scratch("determinism");
    let dirs = [base.join("a"), base.join("b")];
    for dir in &dirs {
        let mut args = run_args(dir.clone());
        args.slots = Some(250);
        cmd_run(&args).unwrap();
    }
    for file in ["slots.csv", "frames.csv", "summary.json"] {
        let a = fs::read(dirs[0].join(file)).unwrap();
        let b = fs::read(dirs[1].join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let _ = fs::remove_dir_all(&base);
}
