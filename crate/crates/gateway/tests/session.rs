use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::thread::{self, JoinHandle};

use teleop_ass::mpc::OperatorReference;
use teleop_ass::operator::SimulatedOperator;
use teleop_ass::scenario::{ScenarioConfig, StepRecord, load_scenario, run};
use teleop_gateway::client::TeleopClient;
use teleop_gateway::{ENDPOINT, Pacing, STOP_RAMP, ServeOutcome, bind, serve};

fn scenario(name: &str, duration: f64) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"));
    let mut config = load_scenario(path).unwrap();
    config.duration = duration;
    config
}

fn start(config: &ScenarioConfig, pacing: Pacing) -> (String, JoinHandle<ServeOutcome>) {
    let listener: TcpListener = bind(SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    let port = listener.local_addr().unwrap().port();
    let config = config.clone();
    let handle = thread::spawn(move || serve(config, listener, pacing).unwrap());
    (format!("ws://127.0.0.1:{port}{ENDPOINT}"), handle)
}

/// Drives a session with the scripted operator, reading the ghost pose off
/// each frame. Stops after `limit` commands and returns the frames seen.
fn drive(client: &mut TeleopClient, config: &ScenarioConfig, limit: usize) -> Vec<teleop_gateway::StateFrame> {
    let mut operator = SimulatedOperator::new(config.operator.clone(), config.vehicle);
    let mut frames = Vec::new();
    while frames.len() < limit {
        let Some(frame) = client.next_frame().unwrap() else { break };
        let reference = operator.reference(&frame.ghost, frame.t);
        client.send(frame.t, reference).unwrap();
        frames.push(frame);
    }
    frames
}

fn max_position_gap(a: &[StepRecord], b: &[StepRecord]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p.state.x - q.state.x).hypot(p.state.y - q.state.y))
        .fold(0.0, f64::max)
}

#[test]
fn scripted_client_reproduces_the_offline_run() {
    let config = scenario("slalom_latency", 8.0);
    let (_, offline) = run(&config).unwrap();

    let (url, server) = start(&config, Pacing::Lockstep);
    let mut client = TeleopClient::connect(&url, "script").unwrap();
    let frames = drive(&mut client, &config, usize::MAX);
    let outcome = server.join().unwrap();

    assert_eq!(frames.len(), config.steps());
    assert_eq!(outcome.report.commands, config.steps());
    assert_eq!(outcome.report.frames_dropped, 0);
    assert!(outcome.records.iter().all(|r| r.external));
    assert!(max_position_gap(&outcome.records, &offline) < 1e-9);
    for (served, local) in outcome.records.iter().zip(&offline) {
        assert_eq!(served.issued, local.issued);
    }
}

#[test]
fn one_frame_per_step_in_order() {
    let config = scenario("overtake", 2.0);
    let (url, server) = start(&config, Pacing::Lockstep);
    let mut client = TeleopClient::connect(&url, "cadence").unwrap();
    let frames = drive(&mut client, &config, usize::MAX);
    let outcome = server.join().unwrap();

    assert_eq!(frames.len(), outcome.records.len());
    for (j, (frame, record)) in frames.iter().zip(&outcome.records).enumerate() {
        assert_eq!(frame.step, j);
        assert_eq!(frame.t, record.t);
        assert_eq!(frame.state, record.displayed);
        assert_eq!(frame.ghost, record.ghost);
        assert_eq!(frame.predicted_path.len(), config.mpc.horizon + 1);
        assert_eq!(frame.obstacles.len(), config.obstacles.len());
    }
    for pair in frames.windows(2).skip(1) {
        // Each frame reports the reference the previous step issued.
        let issued = outcome.records[pair[0].step].issued;
        assert_eq!(pair[1].reference, issued);
        assert!(pair[1].flags.external);
    }
}

#[test]
fn lost_operator_ramps_the_speed_down_within_a_second() {
    let config = scenario("overtake", 5.0);
    let (url, server) = start(&config, Pacing::Lockstep);
    let mut client = TeleopClient::connect(&url, "drops").unwrap();
    let sent = 40;
    drive(&mut client, &config, sent);
    client.abort();
    let outcome = server.join().unwrap();

    let records = &outcome.records;
    assert_eq!(records.len(), config.steps());
    let held = records[sent - 1].issued;
    assert!(held.v_ref > 1.0);
    let ramp_steps = (STOP_RAMP / config.mpc.t_s).round() as usize;
    let tail = &records[sent - 1..];
    for pair in tail.windows(2) {
        assert!(pair[1].issued.v_ref <= pair[0].issued.v_ref);
        assert_eq!(pair[1].issued.delta_ref, held.delta_ref);
    }
    // Loss is noticed at the latest on the step after the last command.
    for r in &records[sent + ramp_steps..] {
        assert_eq!(r.issued.v_ref, 0.0);
    }
    let last = records.last().unwrap();
    assert!(last.state.v < held.v_ref);
}

#[test]
fn malformed_commands_are_counted_and_skipped() {
    let config = scenario("overtake", 0.5);
    let (url, server) = start(&config, Pacing::Lockstep);
    let mut client = TeleopClient::connect(&url, "noisy").unwrap();
    let mut seen = 0;
    while let Some(frame) = client.next_frame().unwrap() {
        if frame.step == 0 {
            client.send_raw("not json").unwrap();
            client.send_raw(r#"{"type":"command","schema_version":99,"t_client":0,"delta_ref":0,"v_ref":1,"session_id":"noisy"}"#).unwrap();
            client.send_raw(r#"{"type":"command","schema_version":1,"t_client":0,"delta_ref":0,"v_ref":1e999,"session_id":"noisy"}"#).unwrap();
        }
        client.send(frame.t, OperatorReference::new(2.0, 50.0)).unwrap();
        seen += 1;
    }
    let outcome = server.join().unwrap();
    assert_eq!(seen, config.steps());
    assert_eq!(outcome.report.malformed, 3);
    assert_eq!(outcome.report.commands, config.steps());
    let v = config.vehicle;
    for r in &outcome.records {
        assert_eq!(r.issued, OperatorReference::new(v.delta_limits.max, v.v_limits.max));
    }
}

#[test]
fn spectators_watch_but_do_not_steer() {
    let config = scenario("overtake", 1.0);
    let (url, server) = start(&config, Pacing::Lockstep);
    let mut operator = TeleopClient::connect(&url, "operator").unwrap();
    let first = operator.next_frame().unwrap().unwrap();

    let mut spectator = TeleopClient::connect(&url, "spectator").unwrap();
    spectator.send(0.0, OperatorReference::new(0.5, 0.0)).unwrap();
    let watcher = thread::spawn(move || {
        let mut frames = 0;
        while let Ok(Some(_)) = spectator.next_frame() {
            frames += 1;
        }
        frames
    });

    let straight = OperatorReference::new(0.0, 3.0);
    operator.send(first.t, straight).unwrap();
    while let Some(frame) = operator.next_frame().unwrap() {
        operator.send(frame.t, straight).unwrap();
    }
    let outcome = server.join().unwrap();
    let watched = watcher.join().unwrap();

    assert_eq!(outcome.report.sessions, 2);
    assert_eq!(outcome.report.ignored, 1);
    assert!(watched > 0);
    assert!(outcome.records.iter().all(|r| r.issued == straight));
}

#[test]
fn without_a_client_the_serve_loop_matches_the_offline_run() {
    let config = scenario("overtake", 1.0);
    let (_, offline) = run(&config).unwrap();
    let (_, server) = start(&config, Pacing::Realtime);
    let outcome = server.join().unwrap();
    assert_eq!(outcome.report.sessions, 0);
    assert!(outcome.records.iter().all(|r| !r.external));
    assert_eq!(max_position_gap(&outcome.records, &offline), 0.0);
}

#[test]
fn realtime_operator_steers_the_vehicle() {
    let config = scenario("overtake", 1.0);
    let (url, server) = start(&config, Pacing::Realtime);
    let mut client = TeleopClient::connect(&url, "live").unwrap();
    let left = OperatorReference::new(0.2, 3.0);
    while let Some(frame) = client.next_frame().unwrap() {
        client.send(frame.t, left).unwrap();
    }
    let outcome = server.join().unwrap();
    assert!(outcome.report.commands > 0);
    assert!(outcome.records.iter().any(|r| r.external && r.issued == left));
}

#[test]
fn other_paths_are_refused() {
    let config = scenario("overtake", 0.5);
    let (url, server) = start(&config, Pacing::Realtime);
    let wrong = url.replace(ENDPOINT, "/elsewhere");
    match tungstenite::connect(&wrong) {
        Err(tungstenite::Error::Http(resp)) => assert_eq!(resp.status(), 404),
        other => panic!("expected a 404, got {:?}", other.map(|_| ())),
    }
    let outcome = server.join().unwrap();
    assert_eq!(outcome.report.sessions, 0);
}
