use std::path::Path;
use std::process::{Command, Output};

fn pudsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pudsim")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = pudsim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn characterize_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let a_s = a.to_str().unwrap();
    run_ok(&["characterize", "--out", a_s, "--seed", "5", "--set", "pattern.victims=97,353", "--set", "sweep.temps=50,80"]);
    let manifest = a.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("# output: results.csv"));
    run_ok(&["characterize", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let read = |d: &Path| std::fs::read(d.join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(read(&a).len() > 100);
}

#[test]
fn trr_report_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    run_ok(&["trr-eval", "--out", d, "--set", "pattern.victims=97", "--set", "trr.seeds=1", "--set", "pattern.budget=20000"]);
    let csv = dir.path().join("trr.csv");
    run_ok(&["report", "trr", csv.to_str().unwrap(), "--out", d]);
    let summary = std::fs::read_to_string(dir.path().join("trr_summary.csv")).unwrap();
    assert!(summary.starts_with("technique,trr,tests,mean_flips"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(pudsim(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(pudsim(&["characterize", "--config", "/nonexistent/run.kv"]).status.code(), Some(1));
    assert_eq!(pudsim(&["characterize", "--set", "bisection.tolerance=0"]).status.code(), Some(1));
    assert_eq!(pudsim(&["characterize", "--set", "no.such.key=1"]).status.code(), Some(1));
}
