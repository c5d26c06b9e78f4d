use serde::{Deserialize, Serialize};

use super::problem::StageRows;
use crate::dynamics::{ControlInput, VehicleState};
use crate::geometry::DISC_COUNT;

/// Slacks `(s^δ, s^p)` of one prediction stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Slack {
    /// Authority band.
    pub delta: f64,
    /// Potential cap.
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InfeasibleQp,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasibleQp => "infeasible_qp",
        }
    }
}

/// Lagrange multipliers of the inequality rows of one stage. Rows that do
/// not exist on a stage (inputs on the last stage, state rows on the first,
/// the band in lateral-only mode) stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageMultipliers {
    /// `[δ̇, a]` upper bounds.
    pub input_upper: [f64; 2],
    /// `[δ̇, a]` lower bounds.
    pub input_lower: [f64; 2],
    pub delta_upper: f64,
    pub delta_lower: f64,
    pub v_upper: f64,
    pub v_lower: f64,
    pub authority_upper: f64,
    pub authority_lower: f64,
    /// Potential cap, one per disc.
    pub potential: [f64; DISC_COUNT],
    pub slack_delta: f64,
    pub slack_potential: f64,
}

impl StageMultipliers {
    pub(crate) fn from_rows(rows: &StageRows, raw: &[f64]) -> Self {
        let mut m = Self::default();
        if let Some((at, count)) = rows.inputs {
            for j in 0..count / 2 {
                m.input_upper[j] = raw[at + 2 * j];
                m.input_lower[j] = raw[at + 2 * j + 1];
            }
        }
        if let Some(at) = rows.states {
            m.delta_upper = raw[at];
            m.delta_lower = raw[at + 1];
            m.v_upper = raw[at + 2];
            m.v_lower = raw[at + 3];
        }
        if let Some(at) = rows.authority {
            m.authority_upper = raw[at];
            m.authority_lower = raw[at + 1];
        }
        if let Some(at) = rows.potential {
            m.potential.copy_from_slice(&raw[at..at + DISC_COUNT]);
        }
        if let Some(at) = rows.slack {
            m.slack_delta = raw[at];
            m.slack_potential = raw[at + 1];
        }
        m
    }

    pub(crate) fn to_rows(&self, rows: &StageRows) -> Vec<f64> {
        let mut raw = vec![0.0; rows.total];
        if let Some((at, count)) = rows.inputs {
            for j in 0..count / 2 {
                raw[at + 2 * j] = self.input_upper[j];
                raw[at + 2 * j + 1] = self.input_lower[j];
            }
        }
        if let Some(at) = rows.states {
            raw[at..at + 4].copy_from_slice(&[self.delta_upper, self.delta_lower, self.v_upper, self.v_lower]);
        }
        if let Some(at) = rows.authority {
            raw[at] = self.authority_upper;
            raw[at + 1] = self.authority_lower;
        }
        if let Some(at) = rows.potential {
            raw[at..at + DISC_COUNT].copy_from_slice(&self.potential);
        }
        if let Some(at) = rows.slack {
            raw[at] = self.slack_delta;
            raw[at + 1] = self.slack_potential;
        }
        raw
    }
}

/// Result of one OCP solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpSolution {
    /// `u_0..u_{N-1}`.
    pub inputs: Vec<ControlInput>,
    /// `z_0..z_N`; `z_0` is the measured state.
    pub states: Vec<VehicleState>,
    /// `slacks[k]` belongs to `states[k + 1]`.
    pub slacks: Vec<Slack>,
    pub cost: f64,
    pub kkt_residual: f64,
    /// Number of QP subproblems solved.
    pub iterations: usize,
    /// Wall-clock solve time (s).
    pub solve_time: f64,
    pub status: SolveStatus,
    /// Multipliers of `f(z_k, u_k) − z_{k+1} = 0`, `k = 0..N-1`.
    pub dynamics_multipliers: Vec<[f64; 5]>,
    /// Inequality multipliers per stage, `k = 0..N`.
    pub stage_multipliers: Vec<StageMultipliers>,
}

impl OcpSolution {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn max_delta_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.delta).fold(0.0, f64::max)
    }

    pub fn max_potential_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.potential).fold(0.0, f64::max)
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}
