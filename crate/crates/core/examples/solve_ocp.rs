//! One active-safety solve: the operator steers straight at a parked car
//! and the controller plans around it.

use teleop_ass::dynamics::{VehicleParams, VehicleState};
use teleop_ass::geometry::{EgoDiscs, Obstacle};
use teleop_ass::mpc::{MpcConfig, OperatorReference, build_ocp, solve};

fn main() {
    let config = MpcConfig::default();
    let vehicle = VehicleParams::default();
    let discs = EgoDiscs::default();
    let start = VehicleState {
        v: 5.0,
        ..Default::default()
    };
    let reference = OperatorReference::new(0.0, 5.0);
    let obstacles = [Obstacle::new_static(12.0, 1.5, 0.0, 4.5, 1.8)];

    let problem = build_ocp(&start, &reference, &obstacles, &config, &vehicle, &discs);
    let cold = solve(&problem, None);
    println!(
        "cold: {} after {} QPs, KKT {:.1e}, cost {:.4}, {:.1} ms",
        cold.status.as_str(),
        cold.iterations,
        cold.kkt_residual,
        cold.cost,
        cold.solve_time * 1e3
    );
    let warm = solve(&problem, Some(&cold));
    println!("warm: {} after {} QPs", warm.status.as_str(), warm.iterations);

    println!("{:>5} {:>7} {:>7} {:>7} {:>6}", "k", "x", "y", "delta", "v");
    for (k, z) in cold.states.iter().enumerate().step_by(5) {
        println!("{k:>5} {:>7.2} {:>7.2} {:>7.3} {:>6.2}", z.x, z.y, z.delta, z.v);
    }
    println!("max steering slack {:.2e}", cold.max_delta_slack());
}
