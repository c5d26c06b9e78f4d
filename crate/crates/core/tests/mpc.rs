mod common;

use common::kkt::kkt_report;
use proptest::prelude::*;
use teleop_ass::dynamics::{VehicleParams, VehicleState};
use teleop_ass::geometry::{EgoDiscs, Obstacle};
use teleop_ass::mpc::{
    ControllerMode, MpcConfig, MpcController, OcpVariant, OperatorReference, SolveStatus, build_ocp,
    build_ocp_variant, solve,
};

fn parked_car_problem(y_offset: f64) -> teleop_ass::mpc::OcpProblem {
    build_ocp(
        &VehicleState { v: 3.0, ..Default::default() },
        &OperatorReference::new(0.0, 3.0),
        &[Obstacle::new_static(9.0, y_offset, 0.0, 4.6, 1.9)],
        &MpcConfig::default(),
        &VehicleParams::default(),
        &EgoDiscs::default(),
    )
}

#[test]
fn cold_solve_satisfies_the_independent_kkt_check() {
    let p = parked_car_problem(2.2);
    let sol = solve(&p, None);
    assert_eq!(sol.status, SolveStatus::Converged);
    let r = kkt_report(&p, &sol);
    assert!(r.residual() < 1e-6, "{r:?}");
}

#[test]
fn warm_start_reaches_the_cold_solution() {
    let config = MpcConfig::default();
    let vehicle = VehicleParams::default();
    let discs = EgoDiscs::default();
    let obstacles = [Obstacle::new_static(12.0, 2.0, 0.0, 4.6, 1.9)];
    let reference = OperatorReference::new(0.0, 3.0);
    let mut controller = MpcController::new(config, vehicle, discs, ControllerMode::ActiveSafety);
    let mut state = VehicleState { v: 3.0, ..Default::default() };
    for _ in 0..5 {
        let (u, _) = controller.step(&state, &reference, &obstacles);
        state = teleop_ass::dynamics::plant_step(&state, &u, &vehicle, config.t_s);
    }
    let p = build_ocp(&state, &reference, &obstacles, &config, &vehicle, &discs);
    let warm = solve(&p, controller.previous());
    let cold = solve(&p, None);
    assert!(warm.is_converged() && cold.is_converged());
    assert!(warm.iterations <= cold.iterations);
    for (a, b) in warm.inputs.iter().zip(&cold.inputs) {
        assert!((a.delta_rate - b.delta_rate).abs() < 1e-4 && (a.a - b.a).abs() < 1e-4);
    }
    assert!((warm.cost - cold.cost).abs() <= 1e-6 * cold.cost.abs().max(1.0));
}

#[test]
fn obstacle_count_does_not_change_the_problem_size() {
    let base = parked_car_problem(2.2);
    for n in [1, 5, 20] {
        let obstacles: Vec<_> = (0..n).map(|i| Obstacle::new_static(5.0 + 3.0 * i as f64, 4.0, 0.0, 4.0, 1.8)).collect();
        let p = build_ocp(&base.initial, &base.reference, &obstacles, &base.config, &base.vehicle, &base.discs);
        assert_eq!(p.decision_variable_count(), base.decision_variable_count());
        assert_eq!(p.constraint_count_without_potential(), base.constraint_count_without_potential());
        assert_eq!(p.potential_constraint_count(), base.potential_constraint_count());
    }
}

#[test]
fn baseline_variant_has_no_band() {
    let p = build_ocp_variant(
        &VehicleState { v: 2.0, ..Default::default() },
        &OperatorReference::new(0.1, 3.0),
        &[Obstacle::new_static(9.0, 0.5, 0.0, 4.6, 1.9)],
        &MpcConfig::default(),
        &VehicleParams::default(),
        &EgoDiscs::default(),
        OcpVariant::LateralOnly { speed_gain: 1.0 },
    );
    let sol = solve(&p, None);
    assert!(sol.is_converged());
    assert!(sol.stage_multipliers.iter().all(|m| m.authority_upper == 0.0 && m.authority_lower == 0.0));
    assert!(kkt_report(&p, &sol).residual() < 1e-6);
}

fn scene() -> impl Strategy<Value = (VehicleState, OperatorReference, Vec<Obstacle>)> {
    (
        -0.3..0.3f64,
        -0.2..0.2f64,
        0.0..6.0f64,
        -0.3..0.3f64,
        0.0..6.0f64,
        prop::collection::vec((6.0..25.0f64, -4.0..4.0f64, -0.5..0.5f64), 0..3),
    )
        .prop_map(|(psi, delta, v, delta_ref, v_ref, obs)| {
            let state = VehicleState { psi, delta, v, ..Default::default() };
            let obstacles = obs.into_iter().map(|(x, y, phi)| Obstacle::new_static(x, y, phi, 4.6, 1.9)).collect();
            (state, OperatorReference::new(delta_ref, v_ref), obstacles)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_solutions_are_kkt_points_within_the_band((state, reference, obstacles) in scene()) {
        let p = build_ocp(&state, &reference, &obstacles, &MpcConfig::default(), &VehicleParams::default(), &EgoDiscs::default());
        let sol = solve(&p, None);
        prop_assume!(sol.is_converged());
        let r = kkt_report(&p, &sol);
        prop_assert!(r.residual() < 1e-6, "{:?}", r);
        let band = p.config.delta_dev_max;
        for (z, s) in sol.states[1..].iter().zip(&sol.slacks) {
            let dev = z.delta - p.reference.delta_ref;
            prop_assert!(dev <= band + s.delta + 1e-7 && dev >= -band - s.delta - 1e-7);
        }
        let v = &p.vehicle;
        for u in &sol.inputs {
            prop_assert!((u.delta_rate - v.delta_rate_limits.clamp(u.delta_rate)).abs() < 1e-7);
            prop_assert!((u.a - v.a_limits.clamp(u.a)).abs() < 1e-7);
        }
    }
}
