//! First-order optimality check of an [`OcpSolution`] rebuilt only from
//! the public problem data.
//!
//! The Lagrangian is
//!
//! ```text
//! L = Σ_{k≥1} J_k + Σ_k π_kᵀ (f(z_k, u_k) − z_{k+1}) + Σ_k λ_kᵀ g_k
//! ```
//!
//! with the inequalities written as `g ≤ 0`. Quadratic and linear terms are
//! differentiated by hand. The potential field and the RK4 step are
//! re-implemented here on forward-mode dual numbers, so their derivatives
//! are exact to rounding even when the multipliers are large.

use std::ops::{Add, Div, Mul, Neg, Sub};

use teleop_ass::dynamics::{ControlInput, VehicleState, integrate_step};
use teleop_ass::geometry::{INTERIOR_GUARD, disc_centers, potential_single};
use teleop_ass::mpc::{Longitudinal, OcpProblem, OcpSolution, StageMultipliers};

/// Value and directional derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }

    fn sin(self) -> Self {
        Self { v: self.v.sin(), d: self.d * self.v.cos() }
    }

    fn cos(self) -> Self {
        Self { v: self.v.cos(), d: -self.d * self.v.sin() }
    }

    fn tan(self) -> Self {
        let t = self.v.tan();
        Self { v: t, d: self.d * (1.0 + t * t) }
    }

    fn atan(self) -> Self {
        Self { v: self.v.atan(), d: self.d / (1.0 + self.v * self.v) }
    }

    fn powi(self, n: i32) -> Self {
        Self { v: self.v.powi(n), d: self.d * n as f64 * self.v.powi(n - 1) }
    }

    fn powf(self, p: f64) -> Self {
        Self { v: self.v.powf(p), d: self.d * p * self.v.powf(p - 1.0) }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self * o.v, d: self * o.d }
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, o: f64) -> Dual {
        Dual { v: self.v + o, d: self.d }
    }
}

type DualVec = [Dual; 5];

fn rate(p: &OcpProblem, z: &DualVec, u: &[Dual; 2]) -> DualVec {
    let (l_f, l_r) = (p.vehicle.l_f, p.vehicle.l_r);
    let beta = (l_r / (l_f + l_r) * z[3].tan()).atan();
    let course = z[2] + beta;
    [z[4] * course.cos(), z[4] * course.sin(), (1.0 / l_r) * z[4] * beta.sin(), u[0], u[1]]
}

fn axpy(z: &DualVec, h: f64, k: &DualVec) -> DualVec {
    std::array::from_fn(|i| z[i] + h * k[i])
}

fn rk4(p: &OcpProblem, z: &DualVec, u: &[Dual; 2]) -> DualVec {
    let h = p.config.t_s;
    let k1 = rate(p, z, u);
    let k2 = rate(p, &axpy(z, 0.5 * h, &k1), u);
    let k3 = rate(p, &axpy(z, 0.5 * h, &k2), u);
    let k4 = rate(p, &axpy(z, h, &k3), u);
    std::array::from_fn(|i| z[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Per-disc potential on dual numbers, summed over obstacles.
fn dual_disc_potentials(p: &OcpProblem, z: &DualVec) -> [Dual; 4] {
    let params = &p.config.potential;
    let (s, c) = (z[2].sin(), z[2].cos());
    p.discs.offsets.map(|d| {
        let cx = z[0] + d * c;
        let cy = z[1] + d * s;
        p.obstacles.iter().fold(Dual::constant(0.0), |acc, o| {
            let (sp, cp) = o.phi.sin_cos();
            let dx = cx + (-o.x);
            let dy = cy + (-o.y);
            let along = cp * dx + sp * dy;
            let across = (-sp) * dx + cp * dy;
            let (alpha, beta) = o.semi_axes(p.discs.radius);
            let n = o.order as i32;
            let level = ((1.0 / alpha) * along).powi(n) + ((1.0 / beta) * across).powi(n);
            let value = if level.v <= INTERIOR_GUARD {
                Dual::constant(params.tau / INTERIOR_GUARD.powf(params.rho))
            } else {
                params.tau * Dual::constant(1.0) / level.powf(params.rho)
            };
            acc + value
        })
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub defects: f64,
    pub infeasibility: f64,
    pub complementarity: f64,
    /// Most negative multiplier, as a positive number.
    pub dual_infeasibility: f64,
}

impl KktReport {
    pub fn residual(&self) -> f64 {
        self.stationarity
            .max(self.defects)
            .max(self.infeasibility)
            .max(self.complementarity)
            .max(self.dual_infeasibility)
    }
}

fn state_of(z: &[f64; 5]) -> VehicleState {
    VehicleState {
        x: z[0],
        y: z[1],
        psi: z[2],
        delta: z[3],
        v: z[4],
    }
}

fn vec_of(s: &VehicleState) -> [f64; 5] {
    [s.x, s.y, s.psi, s.delta, s.v]
}

/// Per-disc potential, summed over obstacles.
fn disc_potentials(p: &OcpProblem, z: &[f64; 5]) -> [f64; 4] {
    let centers = disc_centers(&state_of(z), &p.discs);
    centers.map(|c| {
        p.obstacles
            .iter()
            .map(|o| potential_single(c, o, &p.config.potential, p.discs.radius))
            .sum()
    })
}


fn input_at(p: &OcpProblem, sol: &OcpSolution, k: usize) -> [f64; 2] {
    let u = sol.inputs[k];
    match &p.longitudinal {
        Longitudinal::Optimized => [u.delta_rate, u.a],
        Longitudinal::Prescribed(a) => [u.delta_rate, a[k]],
    }
}

fn step(p: &OcpProblem, z: &[f64; 5], u: &[f64; 2]) -> [f64; 5] {
    let input = ControlInput {
        delta_rate: u[0],
        a: u[1],
    };
    vec_of(&integrate_step(&state_of(z), &input, p.config.t_s, &p.vehicle))
}

/// Derivative of the nonlinear part of stage `k`'s Lagrangian (potential
/// cost, potential caps, dynamics term) along coordinate `seed` of
/// `(z_k, u_k)`.
fn nonlinear_derivative(p: &OcpProblem, sol: &OcpSolution, k: usize, z: &[f64; 5], u: &[f64; 2], seed: usize) -> f64 {
    let n = p.config.horizon;
    let zd: DualVec = std::array::from_fn(|i| Dual { v: z[i], d: f64::from(u8::from(seed == i)) });
    let ud: [Dual; 2] = std::array::from_fn(|i| Dual { v: u[i], d: f64::from(u8::from(seed == 5 + i)) });
    let mut value = 0.0;
    if k >= 1 {
        let lam = &sol.stage_multipliers[k].potential;
        for (pot, l) in dual_disc_potentials(p, &zd).iter().zip(lam) {
            value += (p.config.weights.potential + l) * pot.d;
        }
    }
    if k < n {
        let next = rk4(p, &zd, &ud);
        value += sol.dynamics_multipliers[k].iter().zip(&next).map(|(pi, f)| pi * f.d).sum::<f64>();
    }
    value
}

/// `(g, λ)` pairs of stage `k`, in no particular order.
fn rows(p: &OcpProblem, sol: &OcpSolution, k: usize) -> Vec<(f64, f64)> {
    let n = p.config.horizon;
    let m: &StageMultipliers = &sol.stage_multipliers[k];
    let veh = &p.vehicle;
    let mut out = Vec::new();
    if k < n {
        let u = input_at(p, sol, k);
        out.push((u[0] - veh.delta_rate_limits.max, m.input_upper[0]));
        out.push((veh.delta_rate_limits.min - u[0], m.input_lower[0]));
        if matches!(p.longitudinal, Longitudinal::Optimized) {
            out.push((u[1] - veh.a_limits.max, m.input_upper[1]));
            out.push((veh.a_limits.min - u[1], m.input_lower[1]));
        }
    }
    if k >= 1 {
        let z = sol.states[k];
        let s = sol.slacks[k - 1];
        out.push((z.delta - veh.delta_limits.max, m.delta_upper));
        out.push((veh.delta_limits.min - z.delta, m.delta_lower));
        out.push((z.v - veh.v_limits.max, m.v_upper));
        out.push((veh.v_limits.min - z.v, m.v_lower));
        if p.authority {
            let dev = z.delta - p.reference.delta_ref;
            out.push((dev - p.config.delta_dev_max - s.delta, m.authority_upper));
            out.push((p.config.delta_dev_min - dev - s.delta, m.authority_lower));
        }
        let tau = p.config.potential.tau;
        for (pot, l) in disc_potentials(p, &vec_of(&z)).iter().zip(&m.potential) {
            out.push((pot - tau - s.potential, *l));
        }
        out.push((-s.delta, m.slack_delta));
        out.push((-s.potential, m.slack_potential));
    }
    out
}

pub fn kkt_report(p: &OcpProblem, sol: &OcpSolution) -> KktReport {
    let n = p.config.horizon;
    let w = &p.config.weights;
    let w_v = match p.longitudinal {
        Longitudinal::Optimized => w.velocity,
        Longitudinal::Prescribed(_) => 0.0,
    };
    let optimized_a = matches!(p.longitudinal, Longitudinal::Optimized);
    let mut r = KktReport::default();
    assert_eq!(sol.states.len(), n + 1);
    assert_eq!(sol.states[0], p.initial);

    for k in 0..=n {
        let m = &sol.stage_multipliers[k];
        let z = vec_of(&sol.states[k]);
        let u = if k < n { input_at(p, sol, k) } else { [0.0; 2] };

        if k >= 1 {
            let mut gz = [0.0; 5];
            for (j, g) in gz.iter_mut().enumerate() {
                *g = nonlinear_derivative(p, sol, k, &z, &u, j) - sol.dynamics_multipliers[k - 1][j];
            }
            gz[3] += 2.0 * w.delta * (z[3] - p.reference.delta_ref);
            gz[3] += m.delta_upper - m.delta_lower;
            gz[4] += 2.0 * w_v * (z[4] - p.reference.v_ref);
            gz[4] += m.v_upper - m.v_lower;
            if p.authority {
                gz[3] += m.authority_upper - m.authority_lower;
            }
            let s = sol.slacks[k - 1];
            let gs_delta = 2.0 * w.slack * s.delta
                - if p.authority { m.authority_upper + m.authority_lower } else { 0.0 }
                - m.slack_delta;
            let gs_pot = 2.0 * w.slack * s.potential - m.potential.iter().sum::<f64>() - m.slack_potential;
            for g in gz.iter().chain([&gs_delta, &gs_pot]) {
                r.stationarity = r.stationarity.max(g.abs());
            }
        }

        if k < n {
            let free = if optimized_a { 2 } else { 1 };
            for j in 0..free {
                let g = nonlinear_derivative(p, sol, k, &z, &u, 5 + j) + m.input_upper[j] - m.input_lower[j];
                r.stationarity = r.stationarity.max(g.abs());
            }
            let next = step(p, &z, &u);
            let target = vec_of(&sol.states[k + 1]);
            for (a, b) in next.iter().zip(&target) {
                r.defects = r.defects.max((a - b).abs());
            }
        }

        for (g, l) in rows(p, sol, k) {
            r.infeasibility = r.infeasibility.max(g.max(0.0));
            r.complementarity = r.complementarity.max((g * l).abs());
            r.dual_infeasibility = r.dual_infeasibility.max((-l).max(0.0));
        }
    }
    r
}

