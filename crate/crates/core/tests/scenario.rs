mod common;

use std::fs;

use tempfile::TempDir;
use teleop_ass::Error;
use teleop_ass::scenario::{
    CONFIG_FILE, Display, METRICS_FILE, Mode, RunMetrics, STEP_COLUMNS, STEPS_FILE, ScenarioConfig, TIMING_FILE,
    emit_logs, load_scenario, random_scenario, read_trajectory, run, simulate, sweep,
};

fn short(seed: u64) -> ScenarioConfig {
    let mut c = random_scenario(seed);
    c.duration = 3.0;
    c
}

#[test]
fn bundled_scenarios_load() {
    for name in ["overtake", "slalom_latency"] {
        let c = common::scenario(name);
        assert_eq!(c.name, name);
        assert!(c.steps() > 0);
    }
}

#[test]
fn step_logs_are_byte_identical_across_runs() {
    let config = short(3);
    let dirs: Vec<TempDir> = (0..2).map(|_| TempDir::new().unwrap()).collect();
    for d in &dirs {
        let (m, r) = run(&config).unwrap();
        emit_logs(&r, &m, &config, d.path()).unwrap();
    }
    let a = fs::read(dirs[0].path().join(STEPS_FILE)).unwrap();
    let b = fs::read(dirs[1].path().join(STEPS_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn logs_have_the_documented_shape() {
    let config = short(4);
    let dir = TempDir::new().unwrap();
    let (m, records) = run(&config).unwrap();
    emit_logs(&records, &m, &config, dir.path()).unwrap();
    for f in [STEPS_FILE, TIMING_FILE, METRICS_FILE, CONFIG_FILE] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let steps = fs::read_to_string(dir.path().join(STEPS_FILE)).unwrap();
    let header: Vec<&str> = steps.lines().next().unwrap().split(',').collect();
    assert_eq!(header, STEP_COLUMNS);
    assert_eq!(steps.lines().count(), records.len() + 1);

    let back: RunMetrics = serde_json::from_str(&fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap()).unwrap();
    assert_eq!(back.steps, m.steps);
    let reloaded = load_scenario(dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(reloaded, config);

    let traj = read_trajectory(dir.path()).unwrap();
    assert_eq!(traj.len(), records.len());
    assert_eq!((traj[7].x, traj[7].y), (records[7].state.x, records[7].state.y));
}

#[test]
fn sweep_matches_sequential_runs() {
    let configs: Vec<_> = (10..13).map(short).collect();
    let parallel = sweep(&configs, 3);
    for (c, p) in configs.iter().zip(parallel) {
        let (_, a) = run(c).unwrap();
        let (_, b) = p.unwrap();
        let pos = |r: &[teleop_ass::scenario::StepRecord]| r.iter().map(|s| (s.state.x, s.state.y)).collect::<Vec<_>>();
        assert_eq!(pos(&a), pos(&b));
    }
}

#[test]
fn without_controller_the_applied_reference_is_the_delayed_issued_one() {
    let mut config = short(5);
    config.mode = Mode::None;
    config.latency.actuator_delay = 0.2;
    let records = simulate(&config).unwrap().records;
    assert!(records.iter().all(|r| r.solver.is_none()));
    for j in 4..records.len() {
        assert_eq!(records[j].applied, records[j - 4].issued);
    }
}

#[test]
fn glass_delay_shows_old_states() {
    let mut config = short(6);
    config.latency.glass_delay = 0.15;
    let records = simulate(&config).unwrap().records;
    for j in 3..records.len() {
        assert_eq!(records[j].displayed, records[j - 3].state);
    }
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let base = serde_json::to_value(short(1)).unwrap();

    let mut bad = base.clone();
    bad["duration"] = (-1.0).into();
    match load_scenario(write("neg.json", &bad.to_string())) {
        Err(Error::Config(e)) => assert_eq!(e.field, "duration"),
        other => panic!("{other:?}"),
    }

    let mut bad = base.clone();
    bad["latency"] = serde_json::json!({ "actuator_delay": 0.033 });
    match load_scenario(write("lat.json", &bad.to_string())) {
        Err(Error::Config(e)) => assert_eq!(e.field, "latency.actuator_delay"),
        other => panic!("{other:?}"),
    }

    let mut bad = base.clone();
    bad["mode"] = "none".into();
    bad["display"] = "mpc".into();
    match load_scenario(write("disp.json", &bad.to_string())) {
        Err(Error::Config(e)) => assert_eq!(e.field, "display"),
        other => panic!("{other:?}"),
    }

    let mut bad = base;
    bad["colour"] = "red".into();
    assert!(matches!(load_scenario(write("unknown.json", &bad.to_string())), Err(Error::Parse { .. })));
    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(Error::Io { .. })));
}

#[test]
fn mode_and_display_parse_from_cli_words() {
    assert_eq!("baseline".parse::<Mode>().unwrap(), Mode::Baseline);
    assert_eq!("mpc".parse::<Display>().unwrap(), Display::Mpc);
    assert!("fast".parse::<Mode>().is_err());
    assert_eq!(Mode::Ass.to_string(), "ass");
}
