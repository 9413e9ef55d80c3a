use std::path::Path;
use std::process::{Command, Output};

fn inekf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inekf"))
        .args(args)
        .output()
        .expect("failed to launch inekf")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line_count(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

fn mse_of(file: &Path, channel: &str) -> f64 {
    let text = std::fs::read_to_string(file).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{channel},")))
        .unwrap();
    line.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn simulate_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = inekf(&["simulate", "--steps", "20", "--seed", "7", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["truth.csv", "imu.csv", "kin.csv"] {
        // header plus 20 s at 500 Hz including t = 0
        assert_eq!(line_count(&dir.path().join(f)), 10_002, "{f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("average speed"), "{stdout}");
    let truth = std::fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    let last = truth.lines().last().unwrap();
    assert!(last.starts_with("20.000000000,"), "{last}");
}

#[test]
fn straight_walk_keeps_heading() {
    let dir = tempfile::tempdir().unwrap();
    let out = inekf(&["simulate", "--steps", "4", "--turn", "0", "--out", path(dir.path())]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final heading 0.0000 rad"), "{stdout}");
}

#[test]
fn missing_output_dir_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = inekf(&["simulate", "--steps", "2", "--out", path(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!missing.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "std_fk = 0.01\nwobble = 3\n").unwrap();
    let out = inekf(&["simulate", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("wobble") && err.contains("line 2"), "{err}");
    assert!(!dir.path().join("truth.csv").exists());
}

#[test]
fn unknown_flag_is_rejected() {
    let out = inekf(&["simulate", "--stepz", "3", "--out", "."]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_on_noise_free_logs_tracks_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let sim = inekf(&["simulate", "--steps", "4", "--noise-free", "--out", d]);
    assert!(sim.status.success());
    let run = inekf(&["run", "--filter", "both", "--in", d, "--out", d]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["riekf", "qekf"] {
        assert_eq!(line_count(&dir.path().join(format!("estimate_{f}.csv"))), 2002);
        let mse = mse_of(&dir.path().join(format!("mse_{f}.csv")), "px");
        assert!(mse < 1e-6, "{f}: {mse}");
    }
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn schema_mismatch_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(inekf(&["simulate", "--steps", "2", "--out", d]).status.success());
    let imu = dir.path().join("imu.csv");
    let text = std::fs::read_to_string(&imu).unwrap().replacen("ay", "a_y", 1);
    std::fs::write(&imu, text).unwrap();
    let out = inekf(&["run", "--in", d, "--out", d]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`ay`"), "{err}");
}

#[test]
fn corrupt_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(inekf(&["simulate", "--steps", "2", "--out", d]).status.success());
    let kin = dir.path().join("kin.csv");
    let mut lines: Vec<String> = std::fs::read_to_string(&kin)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[41] = lines[41].replacen(',', ",garbage,", 1);
    std::fs::write(&kin, lines.join("\n") + "\n").unwrap();
    let out = inekf(&["run", "--in", d, "--out", d]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 42"), "{err}");
    assert!(!dir.path().join("estimate_riekf.csv").exists());
}

#[test]
fn benchmark_is_bit_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = inekf(&[
            "benchmark", "--trials", "4", "--steps", "3", "--seed", "42", "--out", path(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let files = ["distribution.csv", "trials_riekf.csv", "trials_qekf.csv", "summary.txt"];
    for f in files {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs between runs");
    }
    assert_eq!(line_count(&a.path().join("trials_riekf.csv")), 5);
    // 9 channels for each of the two filters
    assert_eq!(line_count(&a.path().join("distribution.csv")), 19);
}
