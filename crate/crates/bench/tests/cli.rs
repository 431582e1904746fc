use std::process::Command;

use planarfft_bench::{parse_csv, CSV_HEADER};

fn planarfft() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_planarfft"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = planarfft()
        .args([
            "bench",
            "--rows",
            "32",
            "--cols",
            "32",
            "--strategy",
            "sync",
        ])
        .args(["--workers", "1,2", "--reps", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let recs = parse_csv(&text).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!((recs[0].threads, recs[1].threads), (1, 2));
}

#[test]
fn one_file_per_planning_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let wisdom = dir.path().join("w.txt");
    let run = planarfft()
        .args([
            "bench",
            "--rows",
            "16",
            "--cols",
            "16",
            "--strategy",
            "dist",
        ])
        .args(["--ranks", "1,2", "--threads", "1", "--reps", "2"])
        .args(["--plan", "estimate,measure", "--plan-reps", "1", "--out"])
        .arg(&out)
        .arg("--wisdom")
        .arg(&wisdom)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    for mode in ["estimate", "measure"] {
        let text = std::fs::read_to_string(dir.path().join(format!("s.{mode}.csv"))).unwrap();
        assert_eq!(parse_csv(&text).unwrap().len(), 2);
    }
    assert!(!out.exists());
    let w = std::fs::read_to_string(&wisdom).unwrap();
    assert!(w.starts_with("planarfft-wisdom v1"));
}

#[test]
fn config_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["bench", "--rows", "100"],
        &["bench", "--strategy", "fast"],
        &["bench", "--workers", "4,2"],
        &["bench", "--reps", "0"],
        &["bench", "--plan", "guess"],
        &["bench", "--workers", "x"],
        &["nonsense"],
    ];
    for args in cases {
        let out = planarfft().args(*args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn config_error_names_field() {
    let out = planarfft()
        .args(["bench", "--workers", "4,2"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("workers"));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no").join("such").join("s.csv");
    let run = planarfft()
        .args([
            "bench",
            "--rows",
            "8",
            "--cols",
            "8",
            "--strategy",
            "seq",
            "--reps",
            "1",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn verify_reports_errors() {
    let out = planarfft()
        .args(["verify", "--strategy", "naive", "--workers", "1,4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains("max abs error"));
}

#[test]
fn plan_prints_choice() {
    let out = planarfft()
        .args(["plan", "--rows", "4", "--cols", "4", "--strategy", "seq"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("second_pass=strided"));
}

#[test]
fn cache_budget_env_is_honored() {
    let run = |kb: &str| {
        let out = planarfft()
            .env("PLANARFFT_CACHE_KB", kb)
            .args(["plan", "--rows", "64", "--cols", "1024"])
            .output()
            .unwrap();
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    assert!(run("1").contains("second_pass=transpose"));
    assert!(run("1024").contains("second_pass=strided"));
}
