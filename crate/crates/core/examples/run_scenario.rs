//! Runs a scenario file and writes its logs.
//!
//! `cargo run --example run_scenario -- [scenario.json] [out-dir]`

use std::path::PathBuf;

use teleop_ass::scenario::{emit_logs, load_scenario, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/overtake.json"));
    let config = load_scenario(&path)?;
    let (metrics, records) = run(&config)?;

    println!("{}: {} steps, mode {:?}", config.name, records.len(), config.mode);
    println!("collided          {}", metrics.collided);
    if let Some(c) = metrics.min_clearance {
        println!("min clearance     {c:.3} m");
    }
    println!("max authority dev {:.4} rad", metrics.max_authority_dev);
    if let Some(rtf) = metrics.real_time_factor {
        println!("real-time factor  {rtf:.1}");
    }
    if let Some(dir) = args.next() {
        emit_logs(&records, &metrics, &config, std::path::Path::new(&dir))?;
        println!("logs in {dir}");
    }
    Ok(())
}
