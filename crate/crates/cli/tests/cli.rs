use std::path::Path;
use std::process::{Command, Output};

fn slcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slcp")).args(args).output().expect("run slcp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_simple_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = slcp(&["solve", "--benchmark", "simple", "--algo", "slcp", "--x0", "0.3,0.05", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("iterations  13"), "{out}");
    assert!(out.contains("termination grad_lagrangian"), "{out}");
    let trace = std::fs::read_to_string(dir.path().join("simple_slcp_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 14);
}

#[test]
fn iteration_cap_exits_with_one() {
    let o = slcp(&["solve", "--benchmark", "simple", "--algo", "lsqp", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let o = slcp(&["solve", "--benchmark", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("floudas"));
    let o = slcp(&["solve", "--benchmark", "simple", "--x0", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = slcp(&["bench", "--benchmark", "simple", "--band", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_names_every_benchmark() {
    let o = slcp(&["list"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for id in ["simple", "floudas", "kirschen_ozturk", "hoburg0", "hoburg1", "hoburg3"] {
        assert!(out.contains(id), "{id} missing from\n{out}");
    }
}

/// Trial CSV without the wall-clock column.
fn without_timing(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn bench_is_seed_deterministic_and_plots() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = slcp(&[
            "bench", "--benchmark", "simple", "--trials", "5", "--band", "0.1,0.5", "--seed", "7", "--jobs", "1",
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for algo in ["sqp", "lsqp", "slcp"] {
        for band in ["10", "50"] {
            let name = format!("simple_{algo}_{band}.csv");
            assert_eq!(without_timing(&a.path().join(&name)), without_timing(&b.path().join(&name)), "{name}");
        }
    }
    assert!(a.path().join("simple_summary_10.csv").exists());

    let o = slcp(&["curves", "--benchmark", "simple", "--out", a.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(a.path().join("simple_curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(stdout(&o).contains("6 series"));
}

#[test]
fn curves_without_data_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = slcp(&["curves", "--benchmark", "floudas", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn recompute_references_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = slcp(&["recompute-references", "--benchmark", "simple", "--dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = slcp(&["recompute-references", "--benchmark", "simple", "--dir", d]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    let o = slcp(&["recompute-references", "--benchmark", "simple", "--dir", d, "--force"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("simple.ref")).unwrap();
    assert!(text.contains("objective"));
}
