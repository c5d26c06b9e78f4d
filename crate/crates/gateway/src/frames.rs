//! Wire messages exchanged on `/teleop`. Every message is one JSON text
//! frame carrying `type` and `schema_version`.

use serde::{Deserialize, Serialize};
use teleop_ass::dynamics::{VehicleParams, VehicleState};
use teleop_ass::geometry::Obstacle;
use teleop_ass::mpc::{OperatorReference, SolveStatus};
use teleop_ass::scenario::{SLACK_ACTIVE, StepRecord, View};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl From<&VehicleState> for Pose {
    fn from(s: &VehicleState) -> Self {
        Self { x: s.x, y: s.y, psi: s.psi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFrame {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub length: f64,
    pub breadth: f64,
    pub speed: f64,
}

impl From<&Obstacle> for ObstacleFrame {
    fn from(o: &Obstacle) -> Self {
        Self {
            x: o.x,
            y: o.y,
            phi: o.phi,
            length: o.length,
            breadth: o.breadth,
            speed: o.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cone {
    pub left: Vec<Pose>,
    pub right: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// The controller used the authority slack.
    pub slack_active: bool,
    /// The braking fallback was applied.
    pub fallback: bool,
    /// The vehicle follows commands from a connected client.
    pub external: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Telemetry {
    pub v: f64,
    pub delta: f64,
    pub v_ref: f64,
    pub delta_ref: f64,
    /// Seconds; absent without a controller.
    pub solve_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Command,
}

/// What the workstation sees before the operator acts on step `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFrame {
    #[serde(rename = "type")]
    pub kind: StateKind,
    pub schema_version: u32,
    pub step: usize,
    pub t: f64,
    /// Full delayed state as received at the workstation.
    pub state: VehicleState,
    /// Pose from the active predictive display.
    pub ghost: VehicleState,
    pub cone: Cone,
    pub predicted_path: Vec<Pose>,
    pub obstacles: Vec<ObstacleFrame>,
    /// Last reference issued at the workstation.
    pub reference: OperatorReference,
    pub flags: Flags,
    pub telemetry: Telemetry,
}

impl StateFrame {
    /// Frame for the step about to run. `last` is the record of the
    /// previous step, if any. Until the first cone arrives over the delayed
    /// link the cone and path collapse onto the displayed pose.
    pub fn new(step: usize, t: f64, view: &View, ghost: &VehicleState, last: Option<&StepRecord>, horizon: usize) -> Self {
        let poses = |v: &[VehicleState]| v.iter().map(Pose::from).collect::<Vec<_>>();
        let still = vec![Pose::from(&view.state); horizon + 1];
        let (cone, predicted_path) = match &view.cone {
            Some(c) => (
                Cone {
                    left: poses(&c.left),
                    right: poses(&c.right),
                },
                poses(&c.predicted_path),
            ),
            None => (
                Cone {
                    left: still.clone(),
                    right: still.clone(),
                },
                still,
            ),
        };
        let solution = view.solution.as_ref();
        let reference = last.map_or(OperatorReference::new(0.0, 0.0), |r| r.issued);
        Self {
            kind: StateKind::State,
            schema_version: SCHEMA_VERSION,
            step,
            t,
            state: view.state,
            ghost: *ghost,
            cone,
            predicted_path,
            obstacles: view.obstacles.iter().map(ObstacleFrame::from).collect(),
            reference,
            flags: Flags {
                slack_active: solution.is_some_and(|s| s.slacks.first().is_some_and(|k| k.delta > SLACK_ACTIVE)),
                fallback: solution.is_some_and(|s| s.status == SolveStatus::InfeasibleQp),
                external: last.is_some_and(|r| r.external),
            },
            telemetry: Telemetry {
                v: view.state.v,
                delta: view.state.delta,
                v_ref: reference.v_ref,
                delta_ref: reference.delta_ref,
                solve_time: solution.map(|s| s.solve_time),
            },
        }
    }
}

/// Steering and speed request from the workstation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandFrame {
    #[serde(rename = "type")]
    pub kind: CommandKind,
    pub schema_version: u32,
    /// Client clock (s), informational.
    pub t_client: f64,
    pub delta_ref: f64,
    pub v_ref: f64,
    pub session_id: String,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    Version(u32),
    #[error("non-finite {0}")]
    NotFinite(&'static str),
}

impl CommandFrame {
    pub fn new(t_client: f64, reference: OperatorReference, session_id: impl Into<String>) -> Self {
        Self {
            kind: CommandKind::Command,
            schema_version: SCHEMA_VERSION,
            t_client,
            delta_ref: reference.delta_ref,
            v_ref: reference.v_ref,
            session_id: session_id.into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let frame: Self = serde_json::from_str(text)?;
        if frame.schema_version != SCHEMA_VERSION {
            return Err(FrameError::Version(frame.schema_version));
        }
        for (name, v) in [("delta_ref", frame.delta_ref), ("v_ref", frame.v_ref), ("t_client", frame.t_client)] {
            if !v.is_finite() {
                return Err(FrameError::NotFinite(name));
            }
        }
        Ok(frame)
    }

    /// The requested reference clamped to the vehicle limits.
    pub fn reference(&self, vehicle: &VehicleParams) -> OperatorReference {
        OperatorReference::new(self.delta_ref, self.v_ref).clamped(vehicle)
    }
}

impl StateFrame {
    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let frame: Self = serde_json::from_str(text)?;
        if frame.schema_version != SCHEMA_VERSION {
            return Err(FrameError::Version(frame.schema_version));
        }
        Ok(frame)
    }
}
