//! The overtaking scenario under each controller mode.

use std::path::PathBuf;

use teleop_ass::scenario::{Mode, load_scenario, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/overtake.json");
    let base = load_scenario(path)?;

    println!("{:<10} {:>9} {:>14} {:>10} {:>10}", "mode", "collided", "min clearance", "min v", "last v");
    for mode in [Mode::Ass, Mode::Baseline, Mode::None] {
        let mut config = base.clone();
        config.mode = mode;
        let (m, _) = run(&config)?;
        let clearance = m.min_clearance.map_or("-".into(), |c| format!("{c:.3}"));
        println!(
            "{:<10} {:>9} {:>14} {:>10.2} {:>10.2}",
            format!("{mode:?}"),
            m.collided,
            clearance,
            m.velocity.min,
            m.velocity.last
        );
    }
    Ok(())
}
