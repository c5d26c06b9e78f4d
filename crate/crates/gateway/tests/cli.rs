use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use teleop_ass::mpc::OperatorReference;
use teleop_gateway::client::TeleopClient;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_teleop-sim"));
    cmd.env_remove("TELEOP_LOG");
    cmd
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"))
}

/// Copy of a bundled scenario with a shorter duration.
fn shortened(dir: &Path, name: &str, duration: f64) -> PathBuf {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(bundled(name)).unwrap()).unwrap();
    value["duration"] = duration.into();
    let path = dir.join(format!("{name}_short.json"));
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited by signal")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn clean_run_exits_zero_and_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = shortened(dir.path(), "overtake", 2.0);
    let out_dir = dir.path().join("run");
    let out = bin().arg("run").arg(&scenario).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = stdout_json(&out);
    assert_eq!(metrics["collided"], false);
    assert_eq!(metrics["steps"], 40);
    for file in ["steps.csv", "timing.csv", "metrics.json", "config.json"] {
        assert!(out_dir.join(file).is_file(), "{file} missing");
    }
}

#[test]
fn collision_exits_two() {
    let out = bin().arg("run").arg(bundled("overtake")).args(["--mode", "baseline"]).output().unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["collided"], true);
}

#[test]
fn configuration_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().args(["run", "/no/such/scenario.json"]).output().unwrap();
    assert_eq!(code(&missing), 3);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"name":"x","duration":-1}"#).unwrap();
    assert_eq!(code(&bin().arg("run").arg(&broken).output().unwrap()), 3);

    let scenario = shortened(dir.path(), "overtake", 1.0);
    let off_grid = bin().arg("run").arg(&scenario).args(["--latency-ms", "33"]).output().unwrap();
    assert_eq!(code(&off_grid), 3);
    assert!(String::from_utf8_lossy(&off_grid.stderr).contains("config error"));

    for args in [&["run"][..], &["run", "x.json", "--mode", "fast"], &["launch"], &["run", "x.json", "--lockstep"]] {
        assert_eq!(code(&bin().args(args).output().unwrap()), 3, "{args:?}");
    }
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}

#[test]
fn compare_reports_the_deviation_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = shortened(dir.path(), "overtake", 2.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, latency) in [(&a, "0"), (&b, "200")] {
        let run = bin().arg("run").arg(&scenario).args(["--latency-ms", latency]).arg("--out").arg(out).output().unwrap();
        assert_eq!(code(&run), 0);
    }
    let same = bin().arg("compare").arg(&a).arg(&a).output().unwrap();
    assert_eq!(code(&same), 0);
    assert_eq!(stdout_json(&same)["max"], 0.0);

    let differ = bin().arg("compare").arg(&a).arg(b.join("steps.csv")).output().unwrap();
    assert_eq!(code(&differ), 0);
    assert!(stdout_json(&differ)["max"].as_f64().unwrap() > 0.0);

    let missing = bin().arg("compare").arg(&a).arg(dir.path().join("nothing")).output().unwrap();
    assert_eq!(code(&missing), 3);
}

#[test]
fn sweep_prints_one_line_per_latency() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = shortened(dir.path(), "overtake", 2.0);
    let out_dir = dir.path().join("sweep");
    let out = bin()
        .arg("sweep")
        .arg(&scenario)
        .args(["--latency-ms", "0,100,200", "--jobs", "2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for (line, ms) in lines.iter().zip([0.0, 100.0, 200.0]) {
        assert_eq!(line["latency_ms"], ms);
        assert!(out_dir.join(format!("latency_{ms}ms")).join("steps.csv").is_file());
    }
}

#[test]
fn serve_flag_drives_the_run_from_a_client() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = shortened(dir.path(), "overtake", 1.0);
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let child = bin()
        .arg("run")
        .arg(&scenario)
        .args(["--serve", &port.to_string(), "--lockstep"])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();

    let url = format!("ws://127.0.0.1:{port}/teleop");
    let started = Instant::now();
    let mut client = loop {
        match TeleopClient::connect(&url, "cli") {
            Ok(c) => break c,
            Err(_) if started.elapsed() < Duration::from_secs(10) => thread::sleep(Duration::from_millis(20)),
            Err(e) => panic!("server never came up: {e}"),
        }
    };
    let mut frames = 0;
    while let Some(frame) = client.next_frame().unwrap() {
        client.send(frame.t, OperatorReference::new(0.0, 2.0)).unwrap();
        frames += 1;
    }
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(frames, 20);
    assert_eq!(stdout_json(&out)["steps"], 20);
}
