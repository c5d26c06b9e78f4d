use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::geometry::Obstacle;
use crate::operator::{OperatorConfig, Path, SpeedProfile};

/// Free-driving scenario on a gently weaving path with one to four parked
/// cars beside or partly on it. Identical seeds give identical scenarios.
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = rng.random_range(0.0..1.5);
    let wavelength = rng.random_range(25.0..50.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let points: Vec<_> = (0..=60)
        .map(|i| {
            let x = i as f64 * 1.5;
            let y = amplitude * ((x / wavelength) * std::f64::consts::TAU + phase).sin()
                - amplitude * phase.sin();
            [x, y]
        })
        .collect();
    let path = Path::new(points).expect("x increases");
    let v_ref = rng.random_range(2.0..4.0);
    let mut operator = OperatorConfig::new(path.clone(), SpeedProfile::constant(v_ref));
    operator.gamma1 = rng.random_range(0.7..1.5);
    operator.gamma2 = rng.random_range(1.5..2.5);

    let count = rng.random_range(1..=4);
    let obstacles = (0..count)
        .map(|_| {
            let s = rng.random_range(12.0..path.length() - 10.0);
            let ([x, y], heading) = path.sample(s);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let offset = side * rng.random_range(2.2..4.0);
            Obstacle::new_static(
                x - offset * heading.sin(),
                y + offset * heading.cos(),
                heading + rng.random_range(-0.2..0.2),
                rng.random_range(3.5..5.0),
                rng.random_range(1.6..2.0),
            )
        })
        .collect();

    let mut config = ScenarioConfig::new(12.0, operator);
    config.name = format!("random-{seed}");
    config.seed = seed;
    config.obstacles = obstacles;
    let band = rng.random_range(0.03..0.1);
    config.mpc.delta_dev_max = band;
    config.mpc.delta_dev_min = -band;
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        for seed in 0..20 {
            let a = random_scenario(seed);
            a.validate().unwrap();
            assert_eq!(a, random_scenario(seed));
        }
        assert_ne!(random_scenario(1), random_scenario(2));
    }
}
