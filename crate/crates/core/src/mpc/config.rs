use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::{ConfigError, ensure};
use crate::geometry::PotentialParams;
use crate::qp::QpSettings;

/// Cost weights of the four stage-cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcWeights {
    /// Potential field.
    pub potential: f64,
    /// Steering deviation from the operator reference.
    pub delta: f64,
    /// Speed deviation from the operator reference.
    pub velocity: f64,
    /// Slack variables of the soft constraints.
    pub slack: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self {
            potential: 0.1,
            delta: 1e3,
            velocity: 1.0,
            slack: 1e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_sqp_iterations: usize,
    /// Converged when the KKT residual drops below this value.
    pub kkt_tolerance: f64,
    /// Levenberg term added to every Hessian diagonal of the QP.
    pub regularization: f64,
    pub qp_max_iterations: usize,
    /// Average complementarity at which a QP counts as solved.
    pub qp_gap_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_sqp_iterations: 30,
            kkt_tolerance: 1e-7,
            regularization: 1e-6,
            qp_max_iterations: 80,
            qp_gap_tolerance: 1e-11,
        }
    }
}

impl SolverSettings {
    pub(crate) fn qp(&self) -> QpSettings {
        QpSettings {
            max_iterations: self.qp_max_iterations,
            gap_tol: self.qp_gap_tolerance,
            ..QpSettings::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Sampling time (s).
    pub t_s: f64,
    pub weights: MpcWeights,
    /// Lower edge of the steering authority band around the reference (rad).
    pub delta_dev_min: f64,
    /// Upper edge of the steering authority band around the reference (rad).
    pub delta_dev_max: f64,
    /// Potential shape; `tau` also caps the per-disc field.
    pub potential: PotentialParams,
    pub solver: SolverSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 40,
            t_s: 0.05,
            weights: MpcWeights::default(),
            delta_dev_min: -0.05,
            delta_dev_max: 0.05,
            potential: PotentialParams::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.horizon >= 2, "mpc.horizon", "must be at least 2")?;
        ensure(self.t_s > 0.0, "mpc.t_s", "must be positive")?;
        let w = &self.weights;
        ensure(
            [w.potential, w.delta, w.velocity, w.slack]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0),
            "mpc.weights",
            "all weights must be finite and >= 0",
        )?;
        ensure(w.slack > 0.0, "mpc.weights.slack", "must be positive")?;
        ensure(
            self.delta_dev_min < 0.0,
            "mpc.delta_dev_min",
            "must be negative",
        )?;
        ensure(
            self.delta_dev_max > 0.0,
            "mpc.delta_dev_max",
            "must be positive",
        )?;
        self.potential.validate()?;
        ensure(
            self.solver.max_sqp_iterations >= 1,
            "mpc.solver.max_sqp_iterations",
            "must be at least 1",
        )?;
        ensure(
            self.solver.kkt_tolerance > 0.0,
            "mpc.solver.kkt_tolerance",
            "must be positive",
        )
    }

    /// Prediction span `N · t_s` in seconds.
    pub fn horizon_time(&self) -> f64 {
        self.horizon as f64 * self.t_s
    }
}

/// Steering and speed commands of the human (or simulated) operator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorReference {
    pub delta_ref: f64,
    pub v_ref: f64,
}

impl OperatorReference {
    pub fn new(delta_ref: f64, v_ref: f64) -> Self {
        Self { delta_ref, v_ref }
    }

    /// Clamps both commands into the vehicle limits; non-finite values
    /// become zero.
    pub fn clamped(&self, params: &VehicleParams) -> Self {
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        Self {
            delta_ref: params.delta_limits.clamp(finite(self.delta_ref)),
            v_ref: params.v_limits.clamp(finite(self.v_ref)),
        }
    }
}
