//! Runs the `dmps` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dmps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmps")).args(args).env("DMPS_LOG_LEVEL", "error").output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    dmps(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train(out: &Path, shield: &str) {
    let o = dmps(&[
        "train",
        "--env",
        "single-gate",
        "--shield",
        shield,
        "--seeds",
        "2",
        "--timesteps",
        "1500",
        "--out",
        p(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["fly"]), 2);
    assert_eq!(code(&["train", "--env", "moon", "--out", "x"]), 2);
}

#[test]
fn config_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "planner.horizon = 0\n").unwrap();
    assert_eq!(code(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]), 3);
    fs::write(&cfg, "no.such.key = 1\n").unwrap();
    assert_eq!(code(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]), 3);
    assert_eq!(code(&["train", "--seeds", "x", "--out", p(&dir.path().join("o"))]), 3);
    assert_eq!(code(&["oracle", "--horizon", "0", "--out", p(dir.path())]), 3);
    assert_eq!(code(&["scaling", "--horizon", "1", "--out", p(dir.path())]), 3);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(code(&["train", "--config", p(&missing), "--out", p(dir.path())]), 4);
}

#[test]
fn train_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (dmps_dir, mps_dir, eval_dir, report_dir) =
        (dir.path().join("dmps"), dir.path().join("mps"), dir.path().join("eval"), dir.path().join("report"));
    train(&dmps_dir, "dmps");
    train(&mps_dir, "mps");
    for f in ["manifest.json", "config.snapshot", "metrics_seed0.csv", "evals_seed1.csv", "checkpoint_seed1.txt"] {
        assert!(dmps_dir.join(f).is_file(), "{f}");
    }
    let metrics = fs::read_to_string(dmps_dir.join("metrics_seed0.csv")).unwrap();
    assert!(metrics.starts_with("episode,return,shield_invocations,safety_violations,steps,goal_reached\n"));
    assert!(!metrics.contains('\r'));

    let ckpts = [
        dmps_dir.join("checkpoint_seed0.txt"),
        dmps_dir.join("checkpoint_seed1.txt"),
        mps_dir.join("checkpoint_seed0.txt"),
    ];
    let list = ckpts.iter().map(|c| p(c).to_string()).collect::<Vec<_>>().join(",");
    let o = dmps(&["eval", "--checkpoint", &list, "--episodes", "2", "--trajectories", "--out", p(&eval_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(eval_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(summary.contains("single-gate,di,dmps,2,"));
    assert!(eval_dir.join("comparison.csv").is_file());
    let traj = fs::read_to_string(eval_dir.join("trajectories_0.csv")).unwrap();
    assert!(traj.starts_with("episode,t,state,action,source\n"));

    assert_eq!(code(&["report", p(&dmps_dir), "--out", p(&report_dir)]), 0);
    let series = fs::read_to_string(report_dir.join("series.csv")).unwrap();
    assert!(series.starts_with("episode,mean_return,sd_return,mean_invocations,sd_invocations\n"));
    assert!(series.lines().count() > 1);
}

#[test]
fn checkpoint_and_report_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    assert_eq!(code(&["eval", "--checkpoint", p(&dir.path().join("none.txt")), "--out", out]), 5);
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "dmps-checkpoint 1\nseed 0\n").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", p(&bad), "--out", out]), 6);
    assert_eq!(code(&["report", p(&dir.path().join("nowhere")), "--out", out]), 8);
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&["report", p(&empty), "--out", out]), 8);
    let garbled = dir.path().join("metrics_seed0.csv");
    fs::write(&garbled, "episode,return\nx,y\n").unwrap();
    assert_eq!(code(&["report", p(&garbled), "--out", out]), 8);
}

#[test]
fn scaling_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["scaling", "--horizon", "3", "--out", p(dir.path())]), 0);
    let table = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("horizon,mean_expansions,sd_expansions,states,censored"));
    assert_eq!(table.lines().count(), 3);
}
