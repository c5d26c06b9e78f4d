use log::warn;
use serde::{Deserialize, Serialize};

use super::config::{MpcConfig, OperatorReference};
use super::problem::{OcpVariant, build_ocp_variant, elongate_dynamic_obstacles};
use super::solution::{OcpSolution, SolveStatus};
use super::sqp::solve;
use crate::dynamics::{ControlInput, VehicleParams, VehicleState};
use crate::geometry::{EgoDiscs, Obstacle};

/// Speed gain of the proportional law used by the lateral-only baseline.
pub const BASELINE_SPEED_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Steering and speed intervention within the authority band.
    ActiveSafety,
    /// Steering-only intervention, speed follows a proportional law.
    Baseline,
}

impl ControllerMode {
    fn variant(self) -> OcpVariant {
        match self {
            ControllerMode::ActiveSafety => OcpVariant::ActiveSafety,
            ControllerMode::Baseline => OcpVariant::LateralOnly {
                speed_gain: BASELINE_SPEED_GAIN,
            },
        }
    }
}

/// Builds and solves one OCP and returns the input to apply together with
/// the full solution. `obstacles` are used as given; see
/// [`MpcController::step`] for the variant that elongates moving obstacles.
///
/// When the QP subproblem is infeasible the returned input is the braking
/// fallback `(0, a_min)`.
#[allow(clippy::too_many_arguments)]
pub fn controller_step(
    state: &VehicleState,
    reference: &OperatorReference,
    obstacles: &[Obstacle],
    config: &MpcConfig,
    vehicle: &VehicleParams,
    discs: &EgoDiscs,
    mode: ControllerMode,
    prev: Option<&OcpSolution>,
) -> (ControlInput, OcpSolution) {
    let problem = build_ocp_variant(state, reference, obstacles, config, vehicle, discs, mode.variant());
    let solution = solve(&problem, prev);
    let input = match solution.status {
        SolveStatus::InfeasibleQp => {
            warn!("infeasible QP, applying braking fallback");
            ControlInput {
                delta_rate: 0.0,
                a: vehicle.a_limits.min,
            }
        }
        _ => solution.inputs[0],
    };
    (input, solution)
}

/// Controller instance that owns its warm-start memory.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub config: MpcConfig,
    pub vehicle: VehicleParams,
    pub discs: EgoDiscs,
    pub mode: ControllerMode,
    previous: Option<OcpSolution>,
}

impl MpcController {
    pub fn new(config: MpcConfig, vehicle: VehicleParams, discs: EgoDiscs, mode: ControllerMode) -> Self {
        Self {
            config,
            vehicle,
            discs,
            mode,
            previous: None,
        }
    }

    /// Elongates moving obstacles over the horizon, then solves warm-started
    /// from the last solution. An infeasible solve clears the memory.
    pub fn step(
        &mut self,
        state: &VehicleState,
        reference: &OperatorReference,
        obstacles: &[Obstacle],
    ) -> (ControlInput, OcpSolution) {
        let elongated = elongate_dynamic_obstacles(obstacles, self.config.horizon, self.config.t_s);
        let (input, solution) = controller_step(
            state,
            reference,
            &elongated,
            &self.config,
            &self.vehicle,
            &self.discs,
            self.mode,
            self.previous.as_ref(),
        );
        self.previous = (solution.status != SolveStatus::InfeasibleQp).then(|| solution.clone());
        (input, solution)
    }

    pub fn previous(&self) -> Option<&OcpSolution> {
        self.previous.as_ref()
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}
