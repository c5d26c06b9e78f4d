//! Seeded random scenarios: same seed, same file.

use teleop_ass::scenario::{random_scenario, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let seeds = if seeds.is_empty() { vec![1, 2, 3] } else { seeds };
    for seed in seeds {
        let config = random_scenario(seed);
        assert_eq!(serde_json::to_string(&config)?, serde_json::to_string(&random_scenario(seed))?);
        let (m, _) = run(&config)?;
        println!(
            "seed {seed}: {} obstacles, collided {}, min clearance {:.3}",
            config.obstacles.len(),
            m.collided,
            m.min_clearance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
