//! Latency modelling and the operator-side visual feedback.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, VehicleParams, VehicleState, integrate_step};
use crate::error::{ConfigError, ensure};
use crate::mpc::{MpcConfig, OcpSolution};

/// Tolerance used when checking that a delay is a whole number of samples.
const STEP_TOLERANCE: f64 = 1e-9;

/// Converts a duration to a whole number of samples.
pub fn steps_of(duration: f64, t_s: f64, field: &str) -> Result<usize, ConfigError> {
    ensure(duration.is_finite() && duration >= 0.0, field, "must be finite and >= 0")?;
    let steps = (duration / t_s).round();
    ensure(
        (steps * t_s - duration).abs() <= STEP_TOLERANCE * t_s.max(1.0),
        field,
        "must be a multiple of the sampling time",
    )?;
    Ok(steps as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyConfig {
    /// Workstation to vehicle (s).
    pub actuator_delay: f64,
    /// Vehicle to workstation (s).
    pub glass_delay: f64,
}

impl LatencyConfig {
    /// Splits a round trip into glass `⌊X / 2t_s⌋` samples and the rest on
    /// the actuator side.
    pub fn from_round_trip(round_trip: f64, t_s: f64) -> Result<Self, ConfigError> {
        let steps = steps_of(round_trip, t_s, "latency_ms")?;
        let glass = steps / 2;
        Ok(Self {
            actuator_delay: (steps - glass) as f64 * t_s,
            glass_delay: glass as f64 * t_s,
        })
    }

    pub fn validate(&self, t_s: f64) -> Result<(), ConfigError> {
        self.steps(t_s).map(|_| ())
    }

    /// `(actuator, glass)` delays in samples.
    pub fn steps(&self, t_s: f64) -> Result<(usize, usize), ConfigError> {
        Ok((
            steps_of(self.actuator_delay, t_s, "latency.actuator_delay")?,
            steps_of(self.glass_delay, t_s, "latency.glass_delay")?,
        ))
    }

    pub fn round_trip(&self) -> f64 {
        self.actuator_delay + self.glass_delay
    }
}

/// FIFO that releases each record a fixed number of samples after it was
/// pushed. Until it fills, the neutral element comes out instead.
#[derive(Debug, Clone)]
pub struct DelayBuffer<T> {
    delay: usize,
    neutral: T,
    queue: VecDeque<(f64, T)>,
}

impl<T: Clone> DelayBuffer<T> {
    pub fn new(delay_steps: usize, neutral: T) -> Self {
        Self {
            delay: delay_steps,
            neutral,
            queue: VecDeque::with_capacity(delay_steps + 1),
        }
    }

    pub fn delay_steps(&self) -> usize {
        self.delay
    }

    /// Pushes the record stamped `t` and returns the one stamped
    /// `t − delay`, or the neutral element while the buffer fills.
    pub fn push(&mut self, t: f64, record: T) -> T {
        debug_assert!(self.queue.back().is_none_or(|(last, _)| *last < t), "timestamps must increase");
        self.queue.push_back((t, record));
        if self.queue.len() > self.delay {
            self.queue.pop_front().expect("non-empty").1
        } else {
            self.neutral.clone()
        }
    }

    /// Records still in flight, oldest first.
    pub fn drain(&mut self) -> impl Iterator<Item = (f64, T)> + '_ {
        self.queue.drain(..)
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

/// Constant-input prediction: rolls the delayed state forward by
/// `round_trip` with steering angle and speed frozen.
pub fn predictive_display_baseline(
    delayed: &VehicleState,
    round_trip: f64,
    t_s: f64,
    params: &VehicleParams,
) -> VehicleState {
    let hold = ControlInput::default();
    let mut state = *delayed;
    let mut left = round_trip;
    while left > STEP_TOLERANCE * t_s {
        let dt = left.min(t_s);
        state = integrate_step(&state, &hold, dt, params);
        left -= dt;
    }
    state
}

/// Reads the MPC prediction `round_trip` ahead of the solution's first state.
pub fn predictive_display_mpc(
    solution: &OcpSolution,
    round_trip: f64,
    t_s: f64,
) -> Result<VehicleState, ConfigError> {
    let k = steps_of(round_trip, t_s, "latency round trip")?;
    solution
        .states
        .get(k)
        .copied()
        .ok_or_else(|| ConfigError::new("latency round trip", "exceeds the prediction horizon"))
}

/// Left and right edges of the region the controller may steer into, plus
/// the planned path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorityCone {
    pub left: Vec<VehicleState>,
    pub right: Vec<VehicleState>,
    pub predicted_path: Vec<VehicleState>,
}

/// Open-loop rollouts steering at the rate limit towards the edges of the
/// authority band and holding there, with the solution's speed sequence.
pub fn authority_cone(
    state: &VehicleState,
    delta_ref: f64,
    solution: &OcpSolution,
    config: &MpcConfig,
    params: &VehicleParams,
) -> AuthorityCone {
    authority_cone_along(state, delta_ref, &solution.states, config, params)
}

/// [`authority_cone`] around an arbitrary planned path; the edges reuse its
/// speed sequence.
pub fn authority_cone_along(
    state: &VehicleState,
    delta_ref: f64,
    path: &[VehicleState],
    config: &MpcConfig,
    params: &VehicleParams,
) -> AuthorityCone {
    let edge = |target: f64| {
        let target = params.delta_limits.clamp(target);
        let mut z = *state;
        let mut out = Vec::with_capacity(path.len());
        out.push(z);
        for w in path.windows(2) {
            let rate = params.delta_rate_limits.clamp((target - z.delta) / config.t_s);
            let a = (w[1].v - w[0].v) / config.t_s;
            z = params.clamp_state(integrate_step(&z, &ControlInput { delta_rate: rate, a }, config.t_s, params));
            out.push(z);
        }
        out
    };
    AuthorityCone {
        left: edge(delta_ref + config.delta_dev_max),
        right: edge(delta_ref + config.delta_dev_min),
        predicted_path: path.to_vec(),
    }
}
