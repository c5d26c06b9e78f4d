//! Prints the repulsive field around a parked car as a character map.

use teleop_ass::dynamics::VehicleState;
use teleop_ass::geometry::{EgoDiscs, Obstacle, PotentialParams, potential_gradient, potential_single, potential_total};

fn main() {
    let params = PotentialParams::default();
    let discs = EgoDiscs::default();
    let car = Obstacle::new_static(0.0, 0.0, 0.3, 4.5, 1.8);
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];

    for row in 0..25 {
        let y = 6.0 - row as f64 * 0.5;
        let line: String = (0..61)
            .map(|col| {
                let x = -10.0 + col as f64 / 3.0;
                let p = potential_single([x, y], &car, &params, discs.radius);
                let idx = ((p / params.tau) * (shades.len() - 1) as f64).round() as usize;
                shades[idx.min(shades.len() - 1)]
            })
            .collect();
        println!("{line}");
    }

    let ego = VehicleState {
        x: -6.0,
        y: 2.5,
        ..Default::default()
    };
    let value = potential_total(&ego, &[car], &discs, &params);
    let [gx, gy, gpsi] = potential_gradient(&ego, &[car], &discs, &params);
    println!("ego at ({}, {}): P = {value:.4}, grad = ({gx:.4}, {gy:.4}, {gpsi:.4})", ego.x, ego.y);
}
