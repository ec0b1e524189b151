use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn yagitrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yagitrack")).args(args).output().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn simulate_then_track() {
    let dir = tempfile::tempdir().unwrap();
    let c = configs();
    let (det, traj, track, trace) = (
        path(dir.path(), "d.csv"),
        path(dir.path(), "truth.csv"),
        path(dir.path(), "track.csv"),
        path(dir.path(), "trace.csv"),
    );
    let out = yagitrack(&[
        "simulate",
        "--scenario",
        &c.join("scenario.toml").to_string_lossy(),
        "--detections",
        &det,
        "--trajectory",
        &traj,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&det).unwrap().lines().count(), 1 + 1 + 201);
    assert!(fs::read_to_string(&traj).unwrap().contains("seed = 7"));

    let out = yagitrack(&[
        "track",
        "--detections",
        &det,
        "--towers",
        &c.join("towers.toml").to_string_lossy(),
        "--config",
        &c.join("tracker.toml").to_string_lossy(),
        "--track",
        &track,
        "--trace",
        &trace,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&track).unwrap();
    assert!(text.starts_with("# v_max = 20.0\n# z0 = 14.72\n"));
    assert!(text.lines().any(|l| l.starts_with("segment,timestamp,")));
    let trace = fs::read_to_string(&trace).unwrap();
    assert!(trace.lines().any(|l| l == "timestamp,tower_id,beam_index,Z,Z_hat"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = configs().join("scenario.toml");
    let scenario = scenario.to_string_lossy();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    assert!(yagitrack(&["simulate", "--scenario", &scenario, "--detections", &a, "--seed", "3"]).status.success());
    assert!(yagitrack(&["simulate", "--scenario", &scenario, "--detections", &b, "--seed", "3"]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn pattern_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = path(dir.path(), "p.csv");
    let out = yagitrack(&["pattern", "--out", &out_path, "--step-deg", "5"]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.lines().any(|l| l.starts_with("0,0.6768")));
    assert!(text.starts_with("# effective_length = 4.6\n"));
}

#[test]
fn calibrate_writes_a_receiver_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cal.csv");
    let (b, p0) = (0.3013_f64, 4.8916e-11_f64);
    let mut text = String::from("xi,Z\n");
    for k in 0..40 {
        let xi = 10f64.powf(-6.0 + 2.5 * k as f64 / 39.0);
        let z = 255.0 * (b * (xi * xi / p0 + 1.0).ln()).tanh();
        if z < 250.0 {
            text.push_str(&format!("{xi:e},{z}\n"));
        }
    }
    fs::write(&input, text).unwrap();
    let out_path = path(dir.path(), "receiver.toml");
    let out = yagitrack(&["calibrate", "--input", &input.to_string_lossy(), "--out", &out_path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = fs::read_to_string(&out_path).unwrap();
    assert!(written.contains("[receiver]"));
    assert!(written.contains("format_version = 1"));
}

#[test]
fn missing_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = yagitrack(&[
        "track",
        "--detections",
        &path(dir.path(), "none.csv"),
        "--towers",
        &configs().join("towers.toml").to_string_lossy(),
        "--track",
        &path(dir.path(), "t.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.csv"));
}

#[test]
fn unknown_config_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tracker.toml");
    fs::write(&cfg, "format_version = 1\nspeed_limit = 3.0\n").unwrap();
    let det = dir.path().join("d.csv");
    fs::write(&det, "tag_id,timestamp,tower_id,beam_index,Z\n").unwrap();
    let out = yagitrack(&[
        "track",
        "--detections",
        &det.to_string_lossy(),
        "--towers",
        &configs().join("towers.toml").to_string_lossy(),
        "--config",
        &cfg.to_string_lossy(),
        "--track",
        &path(dir.path(), "t.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn untrackable_log_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("d.csv");
    fs::write(
        &det,
        "tag_id,timestamp,tower_id,beam_index,Z\na,0,SIM,0,5\na,6,SIM,0,7\n",
    )
    .unwrap();
    let out = yagitrack(&[
        "track",
        "--detections",
        &det.to_string_lossy(),
        "--towers",
        &configs().join("towers.toml").to_string_lossy(),
        "--track",
        &path(dir.path(), "t.csv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_reports_both_checks() {
    let out = yagitrack(&["validate", "--seeds", "2"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 2);
    let expected = if stdout.contains("FAIL") { 2 } else { 0 };
    assert_eq!(out.status.code(), Some(expected));
}
