//! How far each predictive display lets the driven path drift from the
//! zero-latency run on the slalom.

use std::path::PathBuf;

use teleop_ass::latency::LatencyConfig;
use teleop_ass::scenario::{Display, compare_runs_shifted, load_scenario, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/slalom_latency.json");
    let base = load_scenario(path)?;
    let t_s = base.mpc.t_s;
    let (actuator, _) = base.latency.steps(t_s)?;

    let mut reference = base.clone();
    reference.latency = LatencyConfig::from_round_trip(0.0, t_s)?;
    reference.display = Display::None;
    let (_, zero) = run(&reference)?;

    println!("round trip {:.0} ms", base.latency.round_trip() * 1e3);
    for display in [Display::None, Display::Baseline, Display::Mpc] {
        let mut config = base.clone();
        config.display = display;
        let (m, records) = run(&config)?;
        let dev = compare_runs_shifted(&zero, &records, actuator);
        println!(
            "{:<9} max {:.3} m  mean {:.3} m  collided {}",
            format!("{display:?}"),
            dev.max,
            dev.mean,
            m.collided
        );
    }
    Ok(())
}
