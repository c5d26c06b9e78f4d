//! Helpers shared by the integration tests.

#![allow(dead_code)]

pub mod kkt;

use std::path::PathBuf;

use teleop_ass::scenario::{ScenarioConfig, load_scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> ScenarioConfig {
    load_scenario(scenario_path(name)).expect("bundled scenario loads")
}
