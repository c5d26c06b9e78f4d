//! Shared-control model predictive controller.

mod config;
mod controller;
mod problem;
mod solution;
mod sqp;

pub use config::{MpcConfig, MpcWeights, OperatorReference, SolverSettings};
pub use controller::{BASELINE_SPEED_GAIN, ControllerMode, MpcController, controller_step};
pub use problem::{
    Longitudinal, OcpProblem, OcpVariant, SLACK_DIM, build_ocp, build_ocp_variant,
    elongate_dynamic_obstacles,
};
pub use solution::{OcpSolution, Slack, SolveStatus, StageMultipliers};
pub use sqp::solve;
