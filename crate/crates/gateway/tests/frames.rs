use std::path::PathBuf;

use serde_json::{Value, json};
use teleop_ass::dynamics::VehicleParams;
use teleop_ass::mpc::OperatorReference;
use teleop_ass::scenario::{Simulation, load_scenario, run};
use teleop_gateway::frames::FrameError;
use teleop_gateway::{CommandFrame, SCHEMA_VERSION, StateFrame};

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, instance: &Value) {
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{instance}");
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"))
}

fn frames(name: &str, steps: usize) -> Vec<StateFrame> {
    let config = load_scenario(scenario(name)).unwrap();
    let horizon = config.mpc.horizon;
    let mut sim = Simulation::new(config).unwrap();
    let mut last = None;
    let mut out = Vec::new();
    for _ in 0..steps {
        let (view, ghost) = sim.upcoming();
        out.push(StateFrame::new(sim.step_index(), sim.time(), &view, &ghost, last.as_ref(), horizon));
        last = Some(sim.step(None).record);
    }
    out
}

#[test]
fn state_frames_match_the_schema_and_round_trip() {
    let validator = schema("state_frame.schema.json");
    let frames = frames("slalom_latency", 30);
    for frame in &frames {
        let value = serde_json::to_value(frame).unwrap();
        assert_eq!(value["type"], "state");
        assert_eq!(value["schema_version"], SCHEMA_VERSION);
        assert_valid(&validator, &value);
        let text = serde_json::to_string(frame).unwrap();
        assert_eq!(&StateFrame::parse(&text).unwrap(), frame);
    }
    // The cone arrives over the delayed link after the first solve.
    assert!(frames[0].telemetry.solve_time.is_none());
    let later = frames.last().unwrap();
    assert!(later.telemetry.solve_time.is_some());
    assert_eq!(later.cone.left.len(), later.predicted_path.len());
    assert_ne!(later.cone.left, later.cone.right);
}

#[test]
fn command_frames_match_the_schema_and_round_trip() {
    let validator = schema("command_frame.schema.json");
    let frame = CommandFrame::new(1.25, OperatorReference::new(-0.1, 4.0), "desk-1");
    let value = serde_json::to_value(&frame).unwrap();
    assert_valid(&validator, &value);
    assert_eq!(value["type"], "command");
    let back = CommandFrame::parse(&value.to_string()).unwrap();
    assert_eq!(back, frame);
}

#[test]
fn metrics_match_the_schema() {
    let validator = schema("metrics.schema.json");
    let mut config = load_scenario(scenario("overtake")).unwrap();
    config.duration = 2.0;
    let (metrics, _) = run(&config).unwrap();
    assert_valid(&validator, &serde_json::to_value(&metrics).unwrap());
}

#[test]
fn commands_are_checked_before_use() {
    let good = json!({
        "type": "command", "schema_version": SCHEMA_VERSION,
        "t_client": 0.0, "delta_ref": 0.0, "v_ref": 1.0, "session_id": "a"
    });
    assert!(CommandFrame::parse(&good.to_string()).is_ok());

    let mut wrong_version = good.clone();
    wrong_version["schema_version"] = json!(SCHEMA_VERSION + 1);
    assert!(matches!(
        CommandFrame::parse(&wrong_version.to_string()),
        Err(FrameError::Version(_))
    ));

    let mut wrong_type = good.clone();
    wrong_type["type"] = json!("state");
    assert!(matches!(CommandFrame::parse(&wrong_type.to_string()), Err(FrameError::Json(_))));

    let mut extra = good.clone();
    extra["throttle"] = json!(1.0);
    assert!(CommandFrame::parse(&extra.to_string()).is_err());

    let huge = good.to_string().replace("\"v_ref\":1.0", "\"v_ref\":1e999");
    assert!(CommandFrame::parse(&huge).is_err());
    assert!(CommandFrame::parse("not json").is_err());
}

#[test]
fn commands_are_clamped_to_the_vehicle_limits() {
    let vehicle = VehicleParams::default();
    let frame = CommandFrame::new(0.0, OperatorReference::new(2.0, 100.0), "a");
    let r = frame.reference(&vehicle);
    assert_eq!(r.delta_ref, vehicle.delta_limits.max);
    assert_eq!(r.v_ref, vehicle.v_limits.max);
    let frame = CommandFrame::new(0.0, OperatorReference::new(-2.0, -100.0), "a");
    let r = frame.reference(&vehicle);
    assert_eq!(r.delta_ref, vehicle.delta_limits.min);
    assert_eq!(r.v_ref, vehicle.v_limits.min);
}

#[test]
fn state_frames_from_another_version_are_rejected() {
    let frame = &frames("overtake", 1)[0];
    let mut value = serde_json::to_value(frame).unwrap();
    value["schema_version"] = json!(0);
    assert!(matches!(StateFrame::parse(&value.to_string()), Err(FrameError::Version(_))));
}
