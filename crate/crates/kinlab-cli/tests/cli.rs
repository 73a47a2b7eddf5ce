//! End-to-end checks of the `kinlab` binary: exit codes, headers and
//! reproducible output.

use std::path::PathBuf;
use std::process::Command;

fn kinlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kinlab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kinlab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn usage_errors_exit_with_two() {
    let out = kinlab().args(["verify", "--suite", "medium"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = kinlab().arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "seed = 4\nmetric.colour = red\n").unwrap();
    let out = kinlab().arg("--config").arg(&cfg).args(["norms", "--q", "2", "--r", "2", "--p", "2", "--a", "2", "--d", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn norms_prints_the_verdict() {
    let out = kinlab().args(["norms", "--q", "2", "--r", "30/11", "--p", "10/7", "--a", "15/8", "--d", "3"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("admissible"));
}

#[test]
fn emitted_files_carry_the_header_and_repeat_exactly() {
    let dir = scratch("osc");
    let run = |name: &str| {
        let out = kinlab()
            .args(["--seed", "7", "--emit"])
            .arg(&dir)
            .args(["oscbound", "--gamma", "2", "--eps-ladder", "0.1,0.01", "--emit", name])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(dir.join(name)).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let mut lines = a.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# kinlab") && head.contains("config=") && head.ends_with("seed=7"), "{head}");
    assert_eq!(lines.next().unwrap(), "gamma,eps,sup,bound_ratio");
    assert_eq!(lines.count(), 2);
}

#[test]
fn flow_trajectory_columns() {
    let dir = scratch("flow");
    let out = kinlab()
        .arg("--emit")
        .arg(&dir)
        .args(["flow", "--metric", "glued_sphere", "--seed", "0.05,0,1,0.5", "--t", "2", "--samples", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[1], "t,x_1,x_2,xi_1,xi_2,p,detJ");
    assert_eq!(rows.len(), 7);
    let p: Vec<f64> = rows[2..].iter().map(|r| r.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert!(p.iter().all(|v| (v - p[0]).abs() <= 1e-8 * p[0]));
}
