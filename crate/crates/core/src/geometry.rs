//! Obstacles as inflated superellipses, the four-disc ego approximation and
//! the repulsive potential field built on top of them.
//!
//! The superellipse level of a point `p` with respect to an obstacle is
//!
//! ```text
//! e(p) = (u / α)^n + (w / β)^n - 1,   [u, w] = R(-φ) (p - c)
//! ```
//!
//! with semi-axes `α = 2^(1/n) L/2 + r`, `β = 2^(1/n) B/2 + r`, so that the
//! un-inflated curve passes through the rectangle corners and the inflation
//! by the disc radius `r` lets disc centres be tested as points. Each disc
//! contributes `τ / (e + 1)^ρ` to the field, which equals `τ` on the
//! inflated boundary.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{ConfigError, ensure};

pub type Point = [f64; 2];

/// Number of discs approximating the ego vehicle.
pub const DISC_COUNT: usize = 4;

/// Below `e = -1 + INTERIOR_GUARD` the potential saturates.
pub const INTERIOR_GUARD: f64 = 1e-6;

/// Rectangular obstacle moving with constant speed along its heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    /// Heading (rad).
    #[serde(default)]
    pub phi: f64,
    pub length: f64,
    pub breadth: f64,
    /// Speed along `phi` (m/s).
    #[serde(default)]
    pub speed: f64,
    /// Even superellipse order.
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    4
}

impl Obstacle {
    pub fn new_static(x: f64, y: f64, phi: f64, length: f64, breadth: f64) -> Self {
        Self {
            x,
            y,
            phi,
            length,
            breadth,
            speed: 0.0,
            order: default_order(),
        }
    }

    pub fn with_speed(self, speed: f64) -> Self {
        Self { speed, ..self }
    }

    pub fn is_moving(&self) -> bool {
        self.speed > 0.0
    }

    /// Pose after travelling for `dt` seconds.
    pub fn advanced(&self, dt: f64) -> Self {
        let d = self.speed * dt;
        Self {
            x: self.x + d * self.phi.cos(),
            y: self.y + d * self.phi.sin(),
            ..*self
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        ensure(
            self.x.is_finite() && self.y.is_finite() && self.phi.is_finite(),
            field,
            "pose must be finite",
        )?;
        ensure(self.length > 0.0, field, "length must be positive")?;
        ensure(self.breadth > 0.0, field, "breadth must be positive")?;
        ensure(self.speed >= 0.0, field, "speed must be >= 0")?;
        ensure(
            self.order >= 2 && self.order.is_multiple_of(2),
            field,
            "order must be an even integer >= 2",
        )
    }

    /// Semi-axes `(α, β)` of the superellipse inflated by `r`.
    pub fn semi_axes(&self, r: f64) -> (f64, f64) {
        let f = 2f64.powf(1.0 / self.order as f64);
        (f * self.length / 2.0 + r, f * self.breadth / 2.0 + r)
    }

    pub fn rect(&self) -> Rect {
        Rect {
            center: [self.x, self.y],
            heading: self.phi,
            length: self.length,
            width: self.breadth,
        }
    }
}

/// Four discs of equal radius placed along the vehicle's longitudinal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgoDiscs {
    pub radius: f64,
    /// Signed longitudinal offsets from the centre of mass (m).
    pub offsets: [f64; DISC_COUNT],
}

impl Default for EgoDiscs {
    fn default() -> Self {
        Self {
            radius: 1.16,
            offsets: [-1.86, -0.62, 0.62, 1.86],
        }
    }
}

impl EgoDiscs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.radius > 0.0, "discs.radius", "must be positive")?;
        ensure(
            self.offsets.windows(2).all(|w| w[0] < w[1]),
            "discs.offsets",
            "must be strictly increasing",
        )
    }

    /// Whether every point of `footprint` (centred on the CoM) sampled on a
    /// grid of `step` metres lies inside at least one disc.
    pub fn covers(&self, footprint: &Footprint, step: f64) -> bool {
        let nx = (footprint.length / step).ceil() as usize;
        let ny = (footprint.width / step).ceil() as usize;
        let r2 = self.radius * self.radius;
        (0..=nx).all(|i| {
            let px = -footprint.length / 2.0 + (i as f64 * step).min(footprint.length);
            (0..=ny).all(|j| {
                let py = -footprint.width / 2.0 + (j as f64 * step).min(footprint.width);
                self.offsets
                    .iter()
                    .any(|d| (px - d).powi(2) + py * py <= r2)
            })
        })
    }
}

/// Rectangular outline of the ego vehicle, centred on the CoM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self {
            length: 4.95,
            width: 1.96,
        }
    }
}

impl Footprint {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(
            self.length > 0.0 && self.width > 0.0,
            "footprint",
            "length and width must be positive",
        )
    }

    pub fn rect(&self, state: &VehicleState) -> Rect {
        Rect {
            center: [state.x, state.y],
            heading: state.psi,
            length: self.length,
            width: self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialParams {
    /// Peak value, reached on the inflated obstacle boundary.
    pub tau: f64,
    /// Slope exponent.
    pub rho: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self { tau: 0.1, rho: 2.0 }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.tau > 0.0, "potential.tau", "must be positive")?;
        ensure(self.rho > 0.0, "potential.rho", "must be positive")
    }

    /// Field value for superellipse level `e`, saturating near the centre.
    pub fn value_at_level(&self, e: f64) -> f64 {
        self.tau / (e + 1.0).max(INTERIOR_GUARD).powf(self.rho)
    }

    /// `dP/de`; zero inside the saturated core.
    fn slope_at_level(&self, e: f64) -> f64 {
        let base = e + 1.0;
        if base <= INTERIOR_GUARD {
            0.0
        } else {
            -self.rho * self.tau / base.powf(self.rho + 1.0)
        }
    }
}

pub fn disc_centers(state: &VehicleState, discs: &EgoDiscs) -> [Point; DISC_COUNT] {
    let (s, c) = state.psi.sin_cos();
    discs.offsets.map(|d| [state.x + d * c, state.y + d * s])
}

/// Coordinates of `point` in the obstacle frame.
fn to_obstacle_frame(point: Point, obstacle: &Obstacle) -> (f64, f64) {
    let (s, c) = obstacle.phi.sin_cos();
    let dx = point[0] - obstacle.x;
    let dy = point[1] - obstacle.y;
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Superellipse level of `point`: −1 at the centre, 0 on the boundary
/// inflated by `r`, positive outside.
pub fn superellipse_value(point: Point, obstacle: &Obstacle, r: f64) -> f64 {
    let (u, w) = to_obstacle_frame(point, obstacle);
    let (alpha, beta) = obstacle.semi_axes(r);
    let n = obstacle.order as i32;
    (u / alpha).powi(n) + (w / beta).powi(n) - 1.0
}

/// Level and its gradient with respect to `point`.
fn superellipse_with_gradient(point: Point, obstacle: &Obstacle, r: f64) -> (f64, [f64; 2]) {
    let (u, w) = to_obstacle_frame(point, obstacle);
    let (alpha, beta) = obstacle.semi_axes(r);
    let n = obstacle.order as i32;
    let (su, sw) = (u / alpha, w / beta);
    let e = su.powi(n) + sw.powi(n) - 1.0;
    let de_du = n as f64 * su.powi(n - 1) / alpha;
    let de_dw = n as f64 * sw.powi(n - 1) / beta;
    let (s, c) = obstacle.phi.sin_cos();
    (e, [c * de_du - s * de_dw, s * de_du + c * de_dw])
}

pub fn potential_single(
    point: Point,
    obstacle: &Obstacle,
    params: &PotentialParams,
    r: f64,
) -> f64 {
    params.value_at_level(superellipse_value(point, obstacle, r))
}

pub fn potential_total(
    state: &VehicleState,
    obstacles: &[Obstacle],
    discs: &EgoDiscs,
    params: &PotentialParams,
) -> f64 {
    disc_fields(state, obstacles, discs, params)
        .iter()
        .map(|f| f.value)
        .sum()
}

/// Gradient of [`potential_total`] with respect to `(x, y, ψ)`.
pub fn potential_gradient(
    state: &VehicleState,
    obstacles: &[Obstacle],
    discs: &EgoDiscs,
    params: &PotentialParams,
) -> [f64; 3] {
    disc_fields(state, obstacles, discs, params)
        .iter()
        .fold([0.0; 3], |acc, f| {
            [
                acc[0] + f.gradient[0],
                acc[1] + f.gradient[1],
                acc[2] + f.gradient[2],
            ]
        })
}

/// Field seen by one ego disc, summed over all obstacles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscField {
    pub value: f64,
    /// Derivative with respect to `(x, y, ψ)` of the vehicle pose.
    pub gradient: [f64; 3],
    /// Outer-product curvature surrogate `Σ_m ∇P ∇Pᵀ / (2 P)`.
    pub gauss_newton: Matrix3<f64>,
}

impl Default for DiscField {
    fn default() -> Self {
        Self {
            value: 0.0,
            gradient: [0.0; 3],
            gauss_newton: Matrix3::zeros(),
        }
    }
}

/// Per-disc potential, gradient and Gauss-Newton curvature.
pub fn disc_fields(
    state: &VehicleState,
    obstacles: &[Obstacle],
    discs: &EgoDiscs,
    params: &PotentialParams,
) -> [DiscField; DISC_COUNT] {
    let centers = disc_centers(state, discs);
    let (s, c) = state.psi.sin_cos();
    let mut out = [DiscField::default(); DISC_COUNT];
    for ((field, center), d) in out.iter_mut().zip(centers).zip(discs.offsets) {
        for obstacle in obstacles {
            let (e, de_dp) = superellipse_with_gradient(center, obstacle, discs.radius);
            let value = params.value_at_level(e);
            let slope = params.slope_at_level(e);
            let dp = [slope * de_dp[0], slope * de_dp[1]];
            // The disc centre moves with ψ along (-d sinψ, d cosψ).
            let g = nalgebra::Vector3::new(dp[0], dp[1], d * (-s * dp[0] + c * dp[1]));
            field.value += value;
            field.gradient[0] += g[0];
            field.gradient[1] += g[1];
            field.gradient[2] += g[2];
            if value > 0.0 {
                field.gauss_newton += g * g.transpose() / (2.0 * value);
            }
        }
    }
    out
}

/// Oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Rect {
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.heading.sin_cos();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(a, b)| {
            [
                self.center[0] + a * c - b * s,
                self.center[1] + a * s + b * c,
            ]
        })
    }

    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.heading.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        (c * dx + s * dy).abs() <= self.length / 2.0 && (-s * dx + c * dy).abs() <= self.width / 2.0
    }

    fn axes(&self) -> [Point; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, s], [-s, c]]
    }
}

fn project(corners: &[Point; 4], axis: Point) -> (f64, f64) {
    corners
        .iter()
        .map(|p| p[0] * axis[0] + p[1] * axis[1])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

/// Separation between two rectangles: Euclidean gap when disjoint, minus the
/// penetration depth along the best separating axis when they overlap
/// (zero when they touch).
pub fn signed_distance(a: &Rect, b: &Rect) -> f64 {
    let ca = a.corners();
    let cb = b.corners();
    let mut min_overlap = f64::INFINITY;
    let mut separated = false;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        let overlap = a_hi.min(b_hi) - a_lo.max(b_lo);
        if overlap < 0.0 {
            separated = true;
        }
        min_overlap = min_overlap.min(overlap);
    }
    if !separated {
        return -min_overlap;
    }
    let mut best = f64::INFINITY;
    for (poly, other) in [(&ca, &cb), (&cb, &ca)] {
        for p in poly.iter() {
            for k in 0..4 {
                best = best.min(point_segment_distance(*p, other[k], other[(k + 1) % 4]));
            }
        }
    }
    best
}
