//! Simulated human operator.
//!
//! Steering follows a feedback-linearised path tracker blended towards the
//! steering angle the operator currently sees; speed follows a
//! piecewise-constant schedule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::error::{ConfigError, ensure};
use crate::geometry::Point;
use crate::mpc::OperatorReference;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI { w + 2.0 * PI } else { w }
}

/// Polyline with arc-length parameterisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Path {
    points: Vec<Point>,
    /// Cumulative arc length at each point.
    arc: Vec<f64>,
}

impl Path {
    pub fn new(points: Vec<Point>) -> Result<Self, ConfigError> {
        ensure(points.len() >= 2, "operator.path", "needs at least 2 points")?;
        ensure(
            points.iter().flatten().all(|v| v.is_finite()),
            "operator.path",
            "coordinates must be finite",
        )?;
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            ensure(len > 0.0, "operator.path", "arc length must be strictly increasing")?;
            arc.push(arc.last().unwrap() + len);
        }
        Ok(Self { points, arc })
    }

    pub fn straight(from: Point, to: Point) -> Self {
        Self::new(vec![from, to]).expect("distinct endpoints")
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Arc length of the point on the path closest to `p`.
    pub fn project(&self, p: Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((p[0] - w[0][0]) * d[0] + (p[1] - w[0][1]) * d[1]) / len2).clamp(0.0, 1.0);
            let q = [w[0][0] + t * d[0], w[0][1] + t * d[1]];
            let dist2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if dist2 < best.0 {
                best = (dist2, self.arc[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    /// Point and tangent heading at arc length `s`, clamped to the path.
    pub fn sample(&self, s: f64) -> (Point, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.partition_point(|&a| a <= s) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        let t = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        let point = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        (point, (b[1] - a[1]).atan2(b[0] - a[0]))
    }
}

impl TryFrom<Vec<Point>> for Path {
    type Error = ConfigError;

    fn try_from(points: Vec<Point>) -> Result<Self, ConfigError> {
        Self::new(points)
    }
}

impl From<Path> for Vec<Point> {
    fn from(path: Path) -> Self {
        path.points
    }
}

/// One breakpoint of a [`SpeedProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedBreakpoint {
    /// Time from which the speed applies (s).
    pub t: f64,
    pub v: f64,
}

/// Piecewise-constant reference speed over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeedProfile(pub Vec<SpeedBreakpoint>);

impl SpeedProfile {
    pub fn constant(v: f64) -> Self {
        Self(vec![SpeedBreakpoint { t: 0.0, v }])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = "operator.speed_profile";
        ensure(!self.0.is_empty(), field, "needs at least one breakpoint")?;
        ensure(self.0[0].t <= 0.0, field, "first breakpoint must start at t <= 0")?;
        ensure(
            self.0.windows(2).all(|w| w[1].t > w[0].t),
            field,
            "breakpoint times must be strictly increasing",
        )?;
        ensure(
            self.0.iter().all(|b| b.v.is_finite() && b.t.is_finite()),
            field,
            "values must be finite",
        )
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.0.partition_point(|b| b.t <= t);
        self.0[i.saturating_sub(1)].v
    }
}

fn default_gamma1() -> f64 {
    1.0
}
fn default_gamma2() -> f64 {
    2.0
}
fn default_gamma3() -> f64 {
    0.25
}
fn default_lookahead() -> f64 {
    5.0
}
fn default_v_floor() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    /// Lateral error gain.
    #[serde(default = "default_gamma1")]
    pub gamma1: f64,
    /// Heading error gain.
    #[serde(default = "default_gamma2")]
    pub gamma2: f64,
    /// Pull towards the currently displayed steering angle.
    #[serde(default = "default_gamma3")]
    pub gamma3: f64,
    /// Distance along the path from the closest point to the tracking point (m).
    #[serde(default = "default_lookahead")]
    pub lookahead: f64,
    /// Below this speed the previous steering command is held (m/s).
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
    pub path: Path,
    pub speed_profile: SpeedProfile,
}

impl OperatorConfig {
    pub fn new(path: Path, speed_profile: SpeedProfile) -> Self {
        Self {
            gamma1: default_gamma1(),
            gamma2: default_gamma2(),
            gamma3: default_gamma3(),
            lookahead: default_lookahead(),
            v_floor: default_v_floor(),
            path,
            speed_profile,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.gamma1 > 0.0, "operator.gamma1", "must be positive")?;
        ensure(self.gamma2 > 0.0, "operator.gamma2", "must be positive")?;
        ensure(
            (0.0..=1.0).contains(&self.gamma3),
            "operator.gamma3",
            "must lie in [0, 1]",
        )?;
        ensure(self.lookahead > 0.0, "operator.lookahead", "must be positive")?;
        ensure(self.v_floor > 0.0, "operator.v_floor", "must be positive")?;
        self.speed_profile.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingErrors {
    /// Signed lateral offset (m), positive when the path lies to the left.
    pub e_l: f64,
    /// Path heading minus vehicle heading (rad), in `(−π, π]`.
    pub e_h: f64,
}

/// Tracking point `lookahead` metres along the path from the point closest
/// to the CoM, and the path heading there.
pub fn tracking_point(state: &VehicleState, path: &Path, lookahead: f64) -> (Point, f64) {
    path.sample(path.project(state.position()) + lookahead)
}

/// Errors of the vehicle relative to the tangent line through `point`.
pub fn compute_errors(state: &VehicleState, point: Point, tangent: f64) -> TrackingErrors {
    let dx = point[0] - state.x;
    let dy = point[1] - state.y;
    TrackingErrors {
        e_l: -tangent.sin() * dx + tangent.cos() * dy,
        e_h: wrap_angle(tangent - state.psi),
    }
}

/// Feedback-linearising steering law
/// `atan((−γ1 e_L − γ2 v sin e_H) / (v² cos e_H))`.
///
/// Returns `None` at or below `v_floor`, where the law is singular and the
/// caller holds its previous command.
pub fn fbl_steer(errors: &TrackingErrors, v: f64, config: &OperatorConfig) -> Option<f64> {
    if v <= config.v_floor {
        return None;
    }
    let num = -config.gamma1 * errors.e_l - config.gamma2 * v * errors.e_h.sin();
    // Beyond ±π/2 heading error the law has no meaning; steer hardest instead.
    let den = v * v * errors.e_h.cos().max(1e-9);
    Some((num / den).atan())
}

/// Reference from the state the operator sees.
///
/// `compute_errors` measures where the path is relative to the vehicle, the
/// steering law expects the vehicle's deviation from the path, hence the
/// negated errors. `held` is the previous steering command, used below the
/// speed floor.
pub fn operator_reference(
    displayed: &VehicleState,
    config: &OperatorConfig,
    vehicle: &VehicleParams,
    t: f64,
    held: f64,
) -> OperatorReference {
    let (point, tangent) = tracking_point(displayed, &config.path, config.lookahead);
    let e = compute_errors(displayed, point, tangent);
    let deviation = TrackingErrors {
        e_l: -e.e_l,
        e_h: -e.e_h,
    };
    let delta = match fbl_steer(&deviation, displayed.v, config) {
        Some(fbl) => fbl + config.gamma3 * (displayed.delta - fbl),
        None => held,
    };
    OperatorReference::new(delta, config.speed_profile.at(t)).clamped(vehicle)
}

/// Operator with memory of its last steering command.
#[derive(Debug, Clone)]
pub struct SimulatedOperator {
    pub config: OperatorConfig,
    pub vehicle: VehicleParams,
    last_delta: f64,
}

impl SimulatedOperator {
    pub fn new(config: OperatorConfig, vehicle: VehicleParams) -> Self {
        Self {
            config,
            vehicle,
            last_delta: 0.0,
        }
    }

    pub fn reference(&mut self, displayed: &VehicleState, t: f64) -> OperatorReference {
        let r = operator_reference(displayed, &self.config, &self.vehicle, t, self.last_delta);
        self.last_delta = r.delta_ref;
        r
    }
}
