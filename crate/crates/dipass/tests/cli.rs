//! Black-box tests of the `dipass` binary: exit codes and CSV output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dipass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipass"))
        .args(args)
        .output()
        .expect("failed to launch dipass")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{"num_waveguides": 2, "num_users": 3}"#;

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dipass(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("ok:"), "{stdout}");
}

#[test]
fn validate_rejects_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "{not json",
        r#"{"num_waveguides": 0}"#,
        r#"{"unknown_knob": 1}"#,
        r#"{"tx_power": -5.0}"#,
    ] {
        let cfg = write_config(dir.path(), body);
        let out = dipass(&["validate", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "config {body}: {out:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_config_file_exits_3() {
    let out = dipass(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dipass(&[
        "run",
        "--config",
        &cfg,
        "--experiment",
        "single-pa-sweep",
        "--trials",
        "1",
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dipass(&[
        "run",
        "--config",
        &cfg,
        "--experiment",
        "warp-drive",
        "--out",
        "out.csv",
    ]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn run_writes_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_path = dir.path().join("sweep.csv");
    let out = dipass(&[
        "run",
        "--config",
        &cfg,
        "--experiment",
        "single-pa-sweep",
        "--seed",
        "7",
        "--trials",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# generated_unix=")));
    assert!(text.contains("# experiment=single-pa-sweep seed=7 trials=2"));
    assert!(text.contains("record,trial,y_user,y,gain_sq"));
    let samples = text.lines().filter(|l| l.starts_with("sample,")).count();
    let means = text.lines().filter(|l| l.starts_with("mean,")).count();
    let stderrs = text.lines().filter(|l| l.starts_with("stderr,")).count();
    assert!(samples > 0);
    assert_eq!(means, stderrs);
    // One mean/stderr pair per grid point, a whole number of samples each.
    assert_eq!(samples % means, 0);
}

#[test]
fn suppressed_timestamp_gives_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = dipass(&[
            "run",
            "--config",
            &cfg,
            "--experiment",
            "sumrate-vs-N",
            "--seed",
            "3",
            "--trials",
            "2",
            "--beamformer",
            "zf",
            "--out",
            path.to_str().unwrap(),
            "--no-header-timestamp",
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        fs::read(&path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(!String::from_utf8(a).unwrap().contains("# generated_unix="));
}
