//! Multiple-shooting transcription of the shared-control OCP.
//!
//! Decision variables are `z_1..z_N`, `u_0..u_{N-1}` and per-stage slacks
//! `S_k = (s^δ_k, s^p_k)` for `k = 1..N`; `z_0` is pinned to the measured
//! state. The stage cost is
//!
//! ```text
//! J_k = W_P Σ_i P_{k,i} + W_δ (δ_ref − δ_k)² + W_v (v_ref − v_k)² + W_s |S_k|²
//! ```
//!
//! and every stage carries the box bounds on `u_k`, `δ_k`, `v_k`, the
//! softened authority band `|δ_k − δ_ref| ≤ band + s^δ_k` and one softened
//! cap `P_{k,i} ≤ τ + s^p_k` per ego disc.

use nalgebra::{DMatrix, DVector};

use super::config::{MpcConfig, OperatorReference};
use crate::dynamics::{
    INPUT_DIM, InputVector, STATE_DIM, StateVector, VehicleParams, VehicleState,
};
use crate::geometry::{DISC_COUNT, DiscField, EgoDiscs, Obstacle, disc_fields};

/// Slack components per stage.
pub const SLACK_DIM: usize = 2;

/// How the longitudinal channel is handled.
#[derive(Debug, Clone, PartialEq)]
pub enum Longitudinal {
    /// Acceleration is a decision variable and speed is tracked in the cost.
    Optimized,
    /// Acceleration follows a fixed profile (one value per stage); speed is
    /// not penalised.
    Prescribed(Vec<f64>),
}

/// Controller flavour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OcpVariant {
    /// Lateral and longitudinal intervention within the authority band.
    ActiveSafety,
    /// Steering-only intervention without the authority band; acceleration
    /// follows `a = gain · (v_ref − v)`.
    LateralOnly { speed_gain: f64 },
}

#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub initial: VehicleState,
    pub reference: OperatorReference,
    pub obstacles: Vec<Obstacle>,
    pub config: MpcConfig,
    pub vehicle: VehicleParams,
    pub discs: EgoDiscs,
    pub longitudinal: Longitudinal,
    /// Whether the authority band is imposed.
    pub authority: bool,
}

pub fn build_ocp(
    state: &VehicleState,
    reference: &OperatorReference,
    obstacles: &[Obstacle],
    config: &MpcConfig,
    vehicle: &VehicleParams,
    discs: &EgoDiscs,
) -> OcpProblem {
    build_ocp_variant(
        state,
        reference,
        obstacles,
        config,
        vehicle,
        discs,
        OcpVariant::ActiveSafety,
    )
}

pub fn build_ocp_variant(
    state: &VehicleState,
    reference: &OperatorReference,
    obstacles: &[Obstacle],
    config: &MpcConfig,
    vehicle: &VehicleParams,
    discs: &EgoDiscs,
    variant: OcpVariant,
) -> OcpProblem {
    let initial = vehicle.clamp_state(*state);
    let reference = reference.clamped(vehicle);
    let (longitudinal, authority) = match variant {
        OcpVariant::ActiveSafety => (Longitudinal::Optimized, true),
        OcpVariant::LateralOnly { speed_gain } => {
            let mut v = initial.v;
            let profile = (0..config.horizon)
                .map(|_| {
                    let a = vehicle.a_limits.clamp(speed_gain * (reference.v_ref - v));
                    v = vehicle.v_limits.clamp(v + config.t_s * a);
                    a
                })
                .collect();
            (Longitudinal::Prescribed(profile), false)
        }
    };
    OcpProblem {
        initial,
        reference,
        obstacles: obstacles.to_vec(),
        config: *config,
        vehicle: *vehicle,
        discs: *discs,
        longitudinal,
        authority,
    }
}

/// Replaces every moving obstacle by a static one stretched over the
/// distance it covers within the horizon, assuming constant heading and
/// speed.
pub fn elongate_dynamic_obstacles(obstacles: &[Obstacle], horizon: usize, t_s: f64) -> Vec<Obstacle> {
    obstacles
        .iter()
        .map(|o| {
            if !o.is_moving() {
                return *o;
            }
            let sweep = o.speed * horizon as f64 * t_s;
            Obstacle {
                x: o.x + 0.5 * sweep * o.phi.cos(),
                y: o.y + 0.5 * sweep * o.phi.sin(),
                length: o.length + sweep,
                speed: 0.0,
                ..*o
            }
        })
        .collect()
}

/// Offsets of the inequality rows of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StageRows {
    /// `[δ̇ ≤, −δ̇ ≤, a ≤, −a ≤]`, the `a` rows only when optimised.
    pub inputs: Option<(usize, usize)>,
    /// `[δ ≤ max, δ ≥ min, v ≤ max, v ≥ min]`.
    pub states: Option<usize>,
    /// `[upper, lower]`.
    pub authority: Option<usize>,
    /// One per disc.
    pub potential: Option<usize>,
    /// `[s^δ ≥ 0, s^p ≥ 0]`.
    pub slack: Option<usize>,
    pub total: usize,
}

impl OcpProblem {
    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// Number of optimised input components per stage.
    pub fn input_dim(&self) -> usize {
        match self.longitudinal {
            Longitudinal::Optimized => INPUT_DIM,
            Longitudinal::Prescribed(_) => 1,
        }
    }

    /// Decision variables `z_1..N, u_0..N−1, S_1..N` (the pinned `z_0` is
    /// not counted).
    pub fn decision_variable_count(&self) -> usize {
        self.horizon() * (STATE_DIM + self.input_dim() + SLACK_DIM)
    }

    /// Dynamics equalities plus all inequality rows except the per-disc
    /// potential caps, whose count is `DISC_COUNT · N` regardless of the
    /// number of obstacles.
    pub fn constraint_count_without_potential(&self) -> usize {
        let n = self.horizon();
        let rows: usize = (0..=n)
            .map(|k| {
                let r = self.stage_rows(k);
                r.total - if r.potential.is_some() { DISC_COUNT } else { 0 }
            })
            .sum();
        n * STATE_DIM + rows
    }

    pub fn potential_constraint_count(&self) -> usize {
        self.horizon() * DISC_COUNT
    }

    pub(crate) fn stage_rows(&self, k: usize) -> StageRows {
        let n = self.horizon();
        let mut next = 0;
        let mut take = |count: usize| {
            let at = next;
            next += count;
            at
        };
        let inputs = (k < n).then(|| {
            let count = 2 * self.input_dim();
            (take(count), count)
        });
        let (states, authority, potential, slack) = if k >= 1 {
            let states = Some(take(4));
            let authority = self.authority.then(|| take(2));
            let potential = Some(take(DISC_COUNT));
            let slack = Some(take(SLACK_DIM));
            (states, authority, potential, slack)
        } else {
            (None, None, None, None)
        };
        StageRows {
            inputs,
            states,
            authority,
            potential,
            slack,
            total: next,
        }
    }

    /// Full input vector at stage `k` from the optimised components.
    pub(crate) fn full_input(&self, k: usize, free: &[f64]) -> InputVector {
        match &self.longitudinal {
            Longitudinal::Optimized => InputVector::new(free[0], free[1]),
            Longitudinal::Prescribed(a) => InputVector::new(free[0], a[k]),
        }
    }

    pub(crate) fn stage_fields(&self, z: &StateVector) -> [DiscField; DISC_COUNT] {
        disc_fields(
            &VehicleState::from_vector(z),
            &self.obstacles,
            &self.discs,
            &self.config.potential,
        )
    }

    /// Stage cost for `k ≥ 1`.
    pub(crate) fn stage_cost(&self, z: &StateVector, s: &[f64; SLACK_DIM], fields: &[DiscField]) -> f64 {
        let w = &self.config.weights;
        let potential: f64 = fields.iter().map(|f| f.value).sum();
        let dd = z[3] - self.reference.delta_ref;
        let dv = z[4] - self.reference.v_ref;
        let wv = self.velocity_weight();
        w.potential * potential + w.delta * dd * dd + wv * dv * dv + w.slack * (s[0] * s[0] + s[1] * s[1])
    }

    pub(crate) fn velocity_weight(&self) -> f64 {
        match self.longitudinal {
            Longitudinal::Optimized => self.config.weights.velocity,
            Longitudinal::Prescribed(_) => 0.0,
        }
    }

    /// Inequality values `g(w) ≤ 0` and their Jacobians for stage `k`.
    pub(crate) fn stage_constraints(
        &self,
        k: usize,
        z: &StateVector,
        u_free: &[f64],
        s: &[f64; SLACK_DIM],
        fields: Option<&[DiscField; DISC_COUNT]>,
    ) -> StageConstraints {
        let rows = self.stage_rows(k);
        let nu = if k < self.horizon() { self.input_dim() } else { 0 };
        let ns = if k >= 1 { SLACK_DIM } else { 0 };
        let mut out = StageConstraints {
            g: DVector::zeros(rows.total),
            c_x: DMatrix::zeros(rows.total, STATE_DIM),
            c_u: DMatrix::zeros(rows.total, nu),
            c_s: DMatrix::zeros(rows.total, ns),
        };
        let veh = &self.vehicle;
        if let Some((at, count)) = rows.inputs {
            let limits = [veh.delta_rate_limits, veh.a_limits];
            for j in 0..count / 2 {
                out.g[at + 2 * j] = u_free[j] - limits[j].max;
                out.c_u[(at + 2 * j, j)] = 1.0;
                out.g[at + 2 * j + 1] = limits[j].min - u_free[j];
                out.c_u[(at + 2 * j + 1, j)] = -1.0;
            }
        }
        if let Some(at) = rows.states {
            for (j, (idx, lim)) in [(3, veh.delta_limits), (4, veh.v_limits)].into_iter().enumerate() {
                out.g[at + 2 * j] = z[idx] - lim.max;
                out.c_x[(at + 2 * j, idx)] = 1.0;
                out.g[at + 2 * j + 1] = lim.min - z[idx];
                out.c_x[(at + 2 * j + 1, idx)] = -1.0;
            }
        }
        if let Some(at) = rows.authority {
            let dev = z[3] - self.reference.delta_ref;
            out.g[at] = dev - self.config.delta_dev_max - s[0];
            out.c_x[(at, 3)] = 1.0;
            out.c_s[(at, 0)] = -1.0;
            out.g[at + 1] = self.config.delta_dev_min - dev - s[0];
            out.c_x[(at + 1, 3)] = -1.0;
            out.c_s[(at + 1, 0)] = -1.0;
        }
        if let (Some(at), Some(fields)) = (rows.potential, fields) {
            for (i, f) in fields.iter().enumerate() {
                out.g[at + i] = f.value - self.config.potential.tau - s[1];
                for j in 0..3 {
                    out.c_x[(at + i, j)] = f.gradient[j];
                }
                out.c_s[(at + i, 1)] = -1.0;
            }
        }
        if let Some(at) = rows.slack {
            for j in 0..SLACK_DIM {
                out.g[at + j] = -s[j];
                out.c_s[(at + j, j)] = -1.0;
            }
        }
        out
    }
}

pub(crate) struct StageConstraints {
    pub g: DVector<f64>,
    pub c_x: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    pub c_s: DMatrix<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(obstacles: &[Obstacle]) -> OcpProblem {
        build_ocp(
            &VehicleState::default(),
            &OperatorReference::new(0.0, 3.0),
            obstacles,
            &MpcConfig::default(),
            &VehicleParams::default(),
            &EgoDiscs::default(),
        )
    }

    #[test]
    fn decision_vector_size() {
        let p = problem(&[]);
        assert_eq!(p.decision_variable_count(), 40 * (5 + 2 + 2));
    }

    #[test]
    fn dimensions_do_not_depend_on_obstacle_count() {
        let one = problem(&[Obstacle::new_static(10.0, 0.0, 0.0, 4.0, 2.0)]);
        let many = problem(&vec![Obstacle::new_static(10.0, 0.0, 0.0, 4.0, 2.0); 20]);
        assert_eq!(one.decision_variable_count(), many.decision_variable_count());
        assert_eq!(
            one.constraint_count_without_potential(),
            many.constraint_count_without_potential()
        );
        assert_eq!(one.potential_constraint_count(), 160);
    }

    #[test]
    fn elongation_examples() {
        let parked = Obstacle::new_static(5.0, 1.0, 0.3, 4.6, 1.9);
        assert_eq!(elongate_dynamic_obstacles(&[parked], 40, 0.05), vec![parked]);

        let moving = Obstacle::new_static(0.0, 0.0, 0.0, 4.6, 1.9).with_speed(3.0);
        let e = elongate_dynamic_obstacles(&[moving], 40, 0.05)[0];
        assert!((e.length - 10.6).abs() < 1e-12);
        assert!((e.x - 3.0).abs() < 1e-12 && e.y.abs() < 1e-12);
        assert_eq!(e.speed, 0.0);

        let reversed = Obstacle {
            phi: std::f64::consts::PI,
            ..moving
        };
        let r = elongate_dynamic_obstacles(&[reversed], 40, 0.05)[0];
        assert!((r.x + 3.0).abs() < 1e-12 && r.y.abs() < 1e-12);
    }

    #[test]
    fn hold_reference_costs_nothing_without_obstacles() {
        let p = build_ocp(
            &VehicleState {
                delta: 0.1,
                v: 3.0,
                ..Default::default()
            },
            &OperatorReference::new(0.1, 3.0),
            &[],
            &MpcConfig::default(),
            &VehicleParams::default(),
            &EgoDiscs::default(),
        );
        let z = p.initial.to_vector();
        let fields = p.stage_fields(&z);
        assert!(fields.iter().all(|f| f.value == 0.0));
        assert_eq!(p.stage_cost(&z, &[0.0, 0.0], &fields), 0.0);
    }

    #[test]
    fn lateral_only_prescribes_proportional_acceleration() {
        let p = build_ocp_variant(
            &VehicleState {
                v: 2.0,
                ..Default::default()
            },
            &OperatorReference::new(0.0, 3.0),
            &[],
            &MpcConfig::default(),
            &VehicleParams::default(),
            &EgoDiscs::default(),
            OcpVariant::LateralOnly { speed_gain: 1.0 },
        );
        let Longitudinal::Prescribed(a) = &p.longitudinal else {
            panic!("expected prescribed acceleration")
        };
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!(a.windows(2).all(|w| w[1] < w[0]));
        assert!(!p.authority);
        assert_eq!(p.input_dim(), 1);
    }
}
