//! Runs the slalom at several round-trip latencies in parallel.

use std::path::PathBuf;

use teleop_ass::latency::LatencyConfig;
use teleop_ass::scenario::{load_scenario, sweep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/slalom_latency.json");
    let base = load_scenario(path)?;
    let latencies = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let configs = latencies
        .iter()
        .map(|&rt| {
            let mut c = base.clone();
            c.latency = LatencyConfig::from_round_trip(rt, c.mpc.t_s)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, teleop_ass::ConfigError>>()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());

    for (rt, result) in latencies.iter().zip(sweep(&configs, workers)) {
        let (m, _) = result?;
        println!(
            "{:>4.0} ms  collided {:<5}  min clearance {:>6.3}  max authority dev {:.3}",
            rt * 1e3,
            m.collided,
            m.min_clearance.unwrap_or(f64::NAN),
            m.max_authority_dev
        );
    }
    Ok(())
}
