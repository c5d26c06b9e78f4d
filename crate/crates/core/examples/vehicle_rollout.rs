//! Steady cornering with the bicycle model against the closed-form radius.

use teleop_ass::dynamics::{ControlInput, VehicleParams, VehicleState, plant_step, slip_angle};

fn main() {
    let params = VehicleParams::default();
    let t_s = 0.05;
    for delta in [0.05, 0.1, 0.2, 0.4] {
        let mut z = VehicleState {
            delta,
            v: 4.0,
            ..Default::default()
        };
        let hold = ControlInput::default();
        let mut points = Vec::new();
        for _ in 0..400 {
            z = plant_step(&z, &hold, &params, t_s);
            points.push((z.x, z.y));
        }
        // The centre of mass circles the instantaneous centre of rotation.
        let beta = slip_angle(delta, &params);
        let radius = params.l_r / beta.sin();
        let (cx, cy) = (-radius * beta.sin(), radius * beta.cos());
        let worst = points
            .iter()
            .map(|&(x, y)| ((x - cx).hypot(y - cy) - radius).abs())
            .fold(0.0, f64::max);
        println!("delta {delta:.2} rad: radius {radius:7.3} m, max off-circle {worst:.2e} m");
    }
}
