//! Kinematic bicycle model about the centre of mass, its RK4 discretisation
//! and the fine-step plant used as simulation ground truth.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ensure};

pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 2;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputJacobian = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Number of plant sub-steps per controller sample.
pub const PLANT_SUBSTEPS: usize = 10;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub min: f64,
    pub max: f64,
}

impl Limits {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        ensure(
            self.min.is_finite() && self.max.is_finite() && self.min < self.max,
            field,
            "limits must be finite with min < max",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Distance from the centre of mass to the front axle (m).
    pub l_f: f64,
    /// Distance from the centre of mass to the rear axle (m).
    pub l_r: f64,
    /// Road wheel angle (rad).
    pub delta_limits: Limits,
    /// Road wheel angle rate (rad/s).
    pub delta_rate_limits: Limits,
    /// Speed (m/s).
    pub v_limits: Limits,
    /// Acceleration (m/s²).
    pub a_limits: Limits,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            l_f: 1.45,
            l_r: 1.45,
            delta_limits: Limits::new(-0.6, 0.6),
            delta_rate_limits: Limits::new(-0.35, 0.35),
            v_limits: Limits::new(0.0, 10.0),
            a_limits: Limits::new(-3.0, 2.0),
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.l_f > 0.0, "vehicle.l_f", "must be positive")?;
        ensure(self.l_r > 0.0, "vehicle.l_r", "must be positive")?;
        self.delta_limits.validate("vehicle.delta_limits")?;
        ensure(
            self.delta_limits.min > -std::f64::consts::FRAC_PI_2
                && self.delta_limits.max < std::f64::consts::FRAC_PI_2,
            "vehicle.delta_limits",
            "must lie strictly inside (-pi/2, pi/2)",
        )?;
        self.delta_rate_limits.validate("vehicle.delta_rate_limits")?;
        self.v_limits.validate("vehicle.v_limits")?;
        ensure(self.v_limits.min >= 0.0, "vehicle.v_limits", "min must be >= 0")?;
        self.a_limits.validate("vehicle.a_limits")
    }

    pub fn clamp_input(&self, input: ControlInput) -> ControlInput {
        ControlInput {
            delta_rate: self.delta_rate_limits.clamp(input.delta_rate),
            a: self.a_limits.clamp(input.a),
        }
    }

    /// Clamps steering angle and speed into their limits.
    pub fn clamp_state(&self, state: VehicleState) -> VehicleState {
        VehicleState {
            delta: self.delta_limits.clamp(state.delta),
            v: self.v_limits.clamp(state.v),
            ..state
        }
    }
}

/// Pose, steering angle and speed of the ego vehicle. Heading is unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub delta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn to_vector(&self) -> StateVector {
        StateVector::new(self.x, self.y, self.psi, self.delta, self.v)
    }

    pub fn from_vector(z: &StateVector) -> Self {
        Self {
            x: z[0],
            y: z[1],
            psi: z[2],
            delta: z[3],
            v: z[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    /// Steering rate (rad/s).
    pub delta_rate: f64,
    /// Acceleration of the centre of mass (m/s²).
    pub a: f64,
}

impl ControlInput {
    pub fn to_vector(&self) -> InputVector {
        InputVector::new(self.delta_rate, self.a)
    }

    pub fn from_vector(u: &InputVector) -> Self {
        Self {
            delta_rate: u[0],
            a: u[1],
        }
    }
}

/// Time derivative of [`VehicleState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleStateRate {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub delta: f64,
    pub v: f64,
}

/// Slip angle of the velocity vector relative to the vehicle axis.
pub fn slip_angle(delta: f64, params: &VehicleParams) -> f64 {
    let ratio = params.l_r / params.wheelbase();
    (ratio * delta.tan()).atan()
}

pub fn state_derivative(
    state: &VehicleState,
    input: &ControlInput,
    params: &VehicleParams,
) -> VehicleStateRate {
    let beta = slip_angle(state.delta, params);
    let course = state.psi + beta;
    VehicleStateRate {
        x: state.v * course.cos(),
        y: state.v * course.sin(),
        psi: state.v / params.l_r * beta.sin(),
        delta: input.delta_rate,
        v: input.a,
    }
}

fn rate_vector(z: &StateVector, u: &InputVector, params: &VehicleParams) -> StateVector {
    let r = state_derivative(
        &VehicleState::from_vector(z),
        &ControlInput::from_vector(u),
        params,
    );
    StateVector::new(r.x, r.y, r.psi, r.delta, r.v)
}

/// Jacobian of the continuous dynamics with respect to the state.
fn rate_jacobian(z: &StateVector, params: &VehicleParams) -> StateJacobian {
    let (psi, delta, v) = (z[2], z[3], z[4]);
    let ratio = params.l_r / params.wheelbase();
    let tan_d = delta.tan();
    let beta = (ratio * tan_d).atan();
    let dbeta = ratio * (1.0 + tan_d * tan_d) / (1.0 + ratio * ratio * tan_d * tan_d);
    let (s, c) = (psi + beta).sin_cos();

    let mut jac = StateJacobian::zeros();
    jac[(0, 2)] = -v * s;
    jac[(0, 3)] = -v * s * dbeta;
    jac[(0, 4)] = c;
    jac[(1, 2)] = v * c;
    jac[(1, 3)] = v * c * dbeta;
    jac[(1, 4)] = s;
    jac[(2, 3)] = v / params.l_r * beta.cos() * dbeta;
    jac[(2, 4)] = beta.sin() / params.l_r;
    jac
}

fn input_jacobian() -> InputJacobian {
    let mut b = InputJacobian::zeros();
    b[(3, 0)] = 1.0;
    b[(4, 1)] = 1.0;
    b
}

/// One explicit RK4 step with the input held over `dt`.
pub fn integrate_step(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
    params: &VehicleParams,
) -> VehicleState {
    VehicleState::from_vector(&rk4(&state.to_vector(), &input.to_vector(), dt, params))
}

pub(crate) fn rk4(z: &StateVector, u: &InputVector, h: f64, params: &VehicleParams) -> StateVector {
    let k1 = rate_vector(z, u, params);
    let k2 = rate_vector(&(z + k1 * (0.5 * h)), u, params);
    let k3 = rate_vector(&(z + k2 * (0.5 * h)), u, params);
    let k4 = rate_vector(&(z + k3 * h), u, params);
    z + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// RK4 step together with its sensitivities `(∂z⁺/∂z, ∂z⁺/∂u)`.
pub fn integrate_step_with_jacobian(
    z: &StateVector,
    u: &InputVector,
    h: f64,
    params: &VehicleParams,
) -> (StateVector, StateJacobian, InputJacobian) {
    let eye = StateJacobian::identity();
    let bc = input_jacobian();

    let k1 = rate_vector(z, u, params);
    let a1 = rate_jacobian(z, params);
    let z2 = z + k1 * (0.5 * h);
    let k2 = rate_vector(&z2, u, params);
    let a2 = rate_jacobian(&z2, params);
    let z3 = z + k2 * (0.5 * h);
    let k3 = rate_vector(&z3, u, params);
    let a3 = rate_jacobian(&z3, params);
    let z4 = z + k3 * h;
    let k4 = rate_vector(&z4, u, params);
    let a4 = rate_jacobian(&z4, params);

    let k1z = a1;
    let k2z = a2 * (eye + k1z * (0.5 * h));
    let k3z = a3 * (eye + k2z * (0.5 * h));
    let k4z = a4 * (eye + k3z * h);

    let k1u = bc;
    let k2u = a2 * k1u * (0.5 * h) + bc;
    let k3u = a3 * k2u * (0.5 * h) + bc;
    let k4u = a4 * k3u * h + bc;

    let next = z + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    let jz = eye + (k1z + (k2z + k3z) * 2.0 + k4z) * (h / 6.0);
    let ju = (k1u + (k2u + k3u) * 2.0 + k4u) * (h / 6.0);
    (next, jz, ju)
}

/// Advances the ground-truth plant by one controller sample `t_s` using
/// [`PLANT_SUBSTEPS`] RK4 sub-steps, clamping steering angle and speed after
/// each sub-step.
pub fn plant_step(
    state: &VehicleState,
    input: &ControlInput,
    params: &VehicleParams,
    t_s: f64,
) -> VehicleState {
    let dt = t_s / PLANT_SUBSTEPS as f64;
    let mut z = *state;
    for _ in 0..PLANT_SUBSTEPS {
        z = params.clamp_state(integrate_step(&z, input, dt, params));
    }
    z
}

/// Open-loop rollout of `inputs` from `start`, one RK4 step of `dt` each.
pub fn rollout(
    start: &VehicleState,
    inputs: &[ControlInput],
    dt: f64,
    params: &VehicleParams,
) -> Vec<VehicleState> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*start);
    let mut z = *start;
    for u in inputs {
        z = integrate_step(&z, u, dt, params);
        states.push(z);
    }
    states
}
