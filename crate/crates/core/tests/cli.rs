use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rlw::fieldio::read_field;

fn rlw(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlw"))
        .args(args)
        .env("RLW_OUT", out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

const SMALL_SOLITON: &[&str] = &["n=128", "x_min=-20", "x_max=20", "c=0.5", "tau=0.1", "t_end=1"];

#[test]
fn two_soliton_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["two-soliton", "scheme=lmps4,lep-pc6", "n=256", "t_end=2", "tau=0.1"];
    args.push("snapshot_stride=10");
    let out = rlw(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.ends_with("summary.csv")));
    let base = dir.path().join("two-soliton");
    let inv = fs::read_to_string(base.join("lep-pc6_invariants.csv")).unwrap();
    // Header plus t = 0, 0.1, ..., 2.
    assert_eq!(inv.lines().count(), 22);

    let (u, t) = read_field(&base.join("lep-pc6_00000010_u.txt")).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    assert_eq!(u.len(), 256);
    assert!(base.join("lep-pc6_00000010_q.txt").exists());
    assert!(!base.join("lmps4_00000010_q.txt").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "# small run\nscheme = leps4\nn = 128\nx_min = -20\nx_max = 20\nc = 0.5\nt_end = 5\n").unwrap();
    let out = rlw(
        dir.path(),
        &["custom", "--config", file.to_str().unwrap(), "tau=1/10", "t_end=0.5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let inv = fs::read_to_string(dir.path().join("custom/leps4_invariants.csv")).unwrap();
    assert_eq!(inv.lines().count(), 7);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["no-such-experiment"],
        vec!["custom", "tau=-1"],
        vec!["custom", "scheme=rk4"],
        vec!["custom", "n=abc"],
        vec!["custom", "tau"],
        vec!["two-soliton", "n=0"],
        vec!["converge1d", "--config", "/nonexistent/file.cfg"],
    ] {
        let out = rlw(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["custom", "scheme=lmp-pc4", "max_krylov_iters=1", "restart=1"];
    args.extend_from_slice(SMALL_SOLITON);
    let out = rlw(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3));
    // The summary is still written for inspection.
    assert!(dir.path().join("custom/summary.csv").exists());
}

#[test]
fn converge1d_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlw(
        dir.path(),
        &["converge1d", "scheme=lmp-pc6", "n=256", "x_min=-40", "x_max=40", "c=0.5", "taus=0.2,0.1", "t_end=0.4"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("converge1d/errors.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["scheme", "tau", "e2", "order2", "einf", "orderinf", "status"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[0] == "lmp-pc6" && &r[6] == "ok"));
    assert!(rows[0][3].is_empty());
    assert!(rows[1][3].parse::<f64>().unwrap() > 3.0);
}
