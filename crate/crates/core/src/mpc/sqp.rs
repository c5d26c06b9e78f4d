//! Sequential quadratic programming for [`OcpProblem`].
//!
//! Each iteration linearises the RK4 dynamics and all inequality rows at the
//! current iterate and builds a convex QP whose Hessian is the exact Hessian
//! of the least-squares terms plus a Gauss-Newton surrogate for the
//! potential field. Steps are globalised by backtracking on an ℓ1 merit
//! function.

use std::time::Instant;

use log::trace;
use nalgebra::DVector;

use super::problem::{OcpProblem, SLACK_DIM, StageConstraints};
use super::solution::{OcpSolution, Slack, SolveStatus, StageMultipliers};
use crate::dynamics::{
    ControlInput, INPUT_DIM, InputVector, STATE_DIM, StateVector, VehicleState,
    integrate_step_with_jacobian, rk4,
};
use crate::geometry::{DISC_COUNT, DiscField};
use crate::qp::{QpStage, QpStatus, StageQp};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 64.0;

#[derive(Debug, Clone)]
struct Primal {
    z: Vec<StateVector>,
    u: Vec<InputVector>,
    /// Index 0 unused.
    s: Vec<[f64; SLACK_DIM]>,
}

#[derive(Debug, Clone)]
struct Duals {
    pi: Vec<StateVector>,
    lam: Vec<DVector<f64>>,
}

struct Linearization {
    a: Vec<nalgebra::SMatrix<f64, STATE_DIM, STATE_DIM>>,
    b: Vec<nalgebra::SMatrix<f64, STATE_DIM, INPUT_DIM>>,
    defects: Vec<StateVector>,
    fields: Vec<[DiscField; DISC_COUNT]>,
    constraints: Vec<StageConstraints>,
    cost: f64,
}

impl OcpProblem {
    fn free(&self, u: &InputVector) -> Vec<f64> {
        u.as_slice()[..self.input_dim()].to_vec()
    }

    fn cold_start(&self) -> Primal {
        let n = self.horizon();
        let mut u = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n + 1);
        z.push(self.initial.to_vector());
        for k in 0..n {
            let uk = self.full_input(k, &[0.0, 0.0]);
            let uk = self.vehicle.clamp_input(ControlInput::from_vector(&uk)).to_vector();
            let next = rk4(&z[k], &uk, self.config.t_s, &self.vehicle);
            z.push(self.clamp_state(next));
            u.push(uk);
        }
        let mut primal = Primal {
            z,
            u,
            s: vec![[0.0; SLACK_DIM]; n + 1],
        };
        self.lift_slacks(&mut primal);
        primal
    }

    fn shifted_start(&self, prev: &OcpSolution) -> (Primal, Option<Duals>) {
        let n = self.horizon();
        if prev.horizon() != n {
            return (self.cold_start(), None);
        }
        let mut u = Vec::with_capacity(n);
        for k in 0..n {
            let src = prev.inputs[(k + 1).min(n - 1)].to_vector();
            let uk = self.full_input(k, src.as_slice());
            u.push(self.vehicle.clamp_input(ControlInput::from_vector(&uk)).to_vector());
        }
        let mut z = Vec::with_capacity(n + 1);
        z.push(self.initial.to_vector());
        for k in 1..n {
            z.push(self.clamp_state(prev.states[k + 1].to_vector()));
        }
        let last = rk4(&z[n - 1], &u[n - 1], self.config.t_s, &self.vehicle);
        z.push(self.clamp_state(last));

        let mut s = vec![[0.0; SLACK_DIM]; n + 1];
        for k in 1..=n {
            let src = prev.slacks[k.min(n - 1)];
            s[k] = [src.delta, src.potential];
        }
        let mut primal = Primal { z, u, s };
        self.lift_slacks(&mut primal);

        let pi = (0..n)
            .map(|k| StateVector::from(prev.dynamics_multipliers[(k + 1).min(n - 1)]))
            .collect();
        let lam = (0..=n)
            .map(|k| {
                let src = &prev.stage_multipliers[(k + 1).min(n)];
                DVector::from_vec(src.to_rows(&self.stage_rows(k)))
            })
            .collect();
        (primal, Some(Duals { pi, lam }))
    }

    fn clamp_state(&self, mut z: StateVector) -> StateVector {
        z[3] = self.vehicle.delta_limits.clamp(z[3]);
        z[4] = self.vehicle.v_limits.clamp(z[4]);
        z
    }

    /// Raises slacks so that the soft constraints hold at the iterate.
    fn lift_slacks(&self, w: &mut Primal) {
        for k in 1..=self.horizon() {
            let dev = w.z[k][3] - self.reference.delta_ref;
            let need_delta = if self.authority {
                (dev - self.config.delta_dev_max)
                    .max(self.config.delta_dev_min - dev)
                    .max(0.0)
            } else {
                0.0
            };
            let fields = self.stage_fields(&w.z[k]);
            let worst = fields.iter().map(|f| f.value).fold(0.0, f64::max);
            let need_pot = (worst - self.config.potential.tau).max(0.0);
            w.s[k][0] = w.s[k][0].max(need_delta);
            w.s[k][1] = w.s[k][1].max(need_pot);
        }
    }

    fn zero_duals(&self) -> Duals {
        Duals {
            pi: vec![StateVector::zeros(); self.horizon()],
            lam: (0..=self.horizon())
                .map(|k| DVector::zeros(self.stage_rows(k).total))
                .collect(),
        }
    }

    fn linearize(&self, w: &Primal) -> Linearization {
        let n = self.horizon();
        let mut lin = Linearization {
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            defects: Vec::with_capacity(n),
            fields: Vec::with_capacity(n + 1),
            constraints: Vec::with_capacity(n + 1),
            cost: 0.0,
        };
        for k in 0..n {
            let (next, a, b) = integrate_step_with_jacobian(&w.z[k], &w.u[k], self.config.t_s, &self.vehicle);
            lin.defects.push(next - w.z[k + 1]);
            lin.a.push(a);
            lin.b.push(b);
        }
        for k in 0..=n {
            let fields = if k >= 1 {
                self.stage_fields(&w.z[k])
            } else {
                [DiscField::default(); DISC_COUNT]
            };
            let u_free = if k < n { self.free(&w.u[k]) } else { Vec::new() };
            lin.constraints.push(self.stage_constraints(
                k,
                &w.z[k],
                &u_free,
                &w.s[k],
                (k >= 1).then_some(&fields),
            ));
            if k >= 1 {
                lin.cost += self.stage_cost(&w.z[k], &w.s[k], &fields);
            }
            lin.fields.push(fields);
        }
        lin
    }

    /// Cost gradient with respect to `z_k`, `k ≥ 1`.
    fn state_cost_gradient(&self, z: &StateVector, fields: &[DiscField; DISC_COUNT]) -> StateVector {
        let w = &self.config.weights;
        let mut g = StateVector::zeros();
        for f in fields {
            for j in 0..3 {
                g[j] += w.potential * f.gradient[j];
            }
        }
        g[3] = 2.0 * w.delta * (z[3] - self.reference.delta_ref);
        g[4] = 2.0 * self.velocity_weight() * (z[4] - self.reference.v_ref);
        g
    }

    fn kkt_residual(&self, w: &Primal, duals: &Duals, lin: &Linearization) -> f64 {
        let n = self.horizon();
        let nu = self.input_dim();
        let ws = self.config.weights.slack;
        let mut res: f64 = 0.0;
        for k in 0..=n {
            let c = &lin.constraints[k];
            let lam = &duals.lam[k];
            if k >= 1 {
                let mut gz = self.state_cost_gradient(&w.z[k], &lin.fields[k]);
                gz += StateVector::from_column_slice(c.c_x.tr_mul(lam).as_slice());
                gz -= duals.pi[k - 1];
                if k < n {
                    gz += lin.a[k].transpose() * duals.pi[k];
                }
                res = res.max(gz.amax());
                let gs = c.c_s.tr_mul(lam);
                for j in 0..SLACK_DIM {
                    res = res.max((2.0 * ws * w.s[k][j] + gs[j]).abs());
                }
            }
            if k < n {
                let bt_pi = lin.b[k].transpose() * duals.pi[k];
                let gu = c.c_u.tr_mul(lam);
                for j in 0..nu {
                    res = res.max((bt_pi[j] + gu[j]).abs());
                }
                res = res.max(lin.defects[k].amax());
            }
            for (g, l) in c.g.iter().zip(lam.iter()) {
                res = res.max(g.max(0.0)).max((g * l).abs());
            }
        }
        res
    }

    fn build_qp<const NU: usize, const NC: usize>(
        &self,
        w: &Primal,
        duals: &Duals,
        lin: &Linearization,
    ) -> StageQp<STATE_DIM, NU, SLACK_DIM, NC> {
        let n = self.horizon();
        let weights = &self.config.weights;
        let reg = self.config.solver.regularization;
        let mut stages = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let c = &lin.constraints[k];
            let mut st = QpStage::<STATE_DIM, NU, SLACK_DIM, NC>::default();
            st.q_xx.fill_diagonal(reg);
            if k >= 1 {
                // Cap rows contribute their multiplier times the same
                // curvature surrogate.
                let cap = self.stage_rows(k).potential;
                for (i, f) in lin.fields[k].iter().enumerate() {
                    let lam = cap.map_or(0.0, |at| duals.lam[k][at + i].max(0.0));
                    let mut block = st.q_xx.fixed_view_mut::<3, 3>(0, 0);
                    block += f.gauss_newton * (weights.potential + lam);
                }
                st.q_xx[(3, 3)] += 2.0 * weights.delta;
                st.q_xx[(4, 4)] += 2.0 * self.velocity_weight();
                st.q = self.state_cost_gradient(&w.z[k], &lin.fields[k]);
                for j in 0..SLACK_DIM {
                    st.slack_hess[j] = 2.0 * weights.slack + reg;
                    st.slack_grad[j] = 2.0 * weights.slack * w.s[k][j];
                }
            }
            if k < n {
                st.r_uu.fill_diagonal(reg);
                st.a = lin.a[k];
                st.b = lin.b[k].fixed_columns::<NU>(0).into_owned();
                st.c = lin.defects[k];
            }
            for r in 0..c.g.len() {
                for j in 0..STATE_DIM {
                    st.c_x[(r, j)] = c.c_x[(r, j)];
                }
                for j in 0..c.c_u.ncols() {
                    st.c_u[(r, j)] = c.c_u[(r, j)];
                }
                for j in 0..c.c_s.ncols() {
                    st.c_s[(r, j)] = c.c_s[(r, j)];
                }
                st.h[r] = -c.g[r];
            }
            stages.push(st);
        }
        StageQp {
            stages,
            x0: StateVector::zeros(),
        }
    }

    /// ℓ1 merit value and total constraint violation at `w`.
    fn merit(&self, w: &Primal, penalty: f64) -> (f64, f64) {
        let n = self.horizon();
        let mut cost = 0.0;
        let mut violation = 0.0;
        for k in 0..=n {
            if k < n {
                let next = rk4(&w.z[k], &w.u[k], self.config.t_s, &self.vehicle);
                violation += (next - w.z[k + 1]).lp_norm(1);
            }
            let fields = if k >= 1 {
                self.stage_fields(&w.z[k])
            } else {
                [DiscField::default(); DISC_COUNT]
            };
            let u_free = if k < n { self.free(&w.u[k]) } else { Vec::new() };
            let c = self.stage_constraints(k, &w.z[k], &u_free, &w.s[k], (k >= 1).then_some(&fields));
            violation += c.g.iter().map(|g| g.max(0.0)).sum::<f64>();
            if k >= 1 {
                cost += self.stage_cost(&w.z[k], &w.s[k], &fields);
            }
        }
        (cost + penalty * violation, violation)
    }

    /// Directional derivative of the cost along the QP step.
    fn cost_slope(&self, w: &Primal, lin: &Linearization, step: &Primal) -> f64 {
        let ws = self.config.weights.slack;
        (1..=self.horizon())
            .map(|k| {
                let g = self.state_cost_gradient(&w.z[k], &lin.fields[k]);
                g.dot(&step.z[k])
                    + (0..SLACK_DIM)
                        .map(|j| 2.0 * ws * w.s[k][j] * step.s[k][j])
                        .sum::<f64>()
            })
            .sum()
    }

    fn take_step(&self, w: &Primal, step: &Primal, alpha: f64) -> Primal {
        let n = self.horizon();
        let nu = self.input_dim();
        let mut out = w.clone();
        for k in 1..=n {
            out.z[k] = self.clamp_state(w.z[k] + step.z[k] * alpha);
            for j in 0..SLACK_DIM {
                out.s[k][j] = (w.s[k][j] + alpha * step.s[k][j]).max(0.0);
            }
        }
        for k in 0..n {
            for j in 0..nu {
                out.u[k][j] = w.u[k][j] + alpha * step.u[k][j];
            }
            out.u[k] = self.vehicle.clamp_input(ControlInput::from_vector(&out.u[k])).to_vector();
        }
        out
    }

    fn package(
        &self,
        w: &Primal,
        duals: &Duals,
        cost: f64,
        kkt: f64,
        iterations: usize,
        status: SolveStatus,
        started: Instant,
    ) -> OcpSolution {
        let n = self.horizon();
        OcpSolution {
            inputs: w.u.iter().map(ControlInput::from_vector).collect(),
            states: w.z.iter().map(VehicleState::from_vector).collect(),
            slacks: (1..=n)
                .map(|k| Slack {
                    delta: w.s[k][0],
                    potential: w.s[k][1],
                })
                .collect(),
            cost,
            kkt_residual: kkt,
            iterations,
            solve_time: started.elapsed().as_secs_f64(),
            status,
            dynamics_multipliers: duals.pi.iter().map(|p| [p[0], p[1], p[2], p[3], p[4]]).collect(),
            stage_multipliers: (0..=n)
                .map(|k| StageMultipliers::from_rows(&self.stage_rows(k), duals.lam[k].as_slice()))
                .collect(),
        }
    }
}

/// Solves the OCP by SQP. With `warm_start`, the previous solution shifted
/// by one stage initialises primal and dual variables.
pub fn solve(problem: &OcpProblem, warm_start: Option<&OcpSolution>) -> OcpSolution {
    let rows = (0..=problem.horizon()).map(|k| problem.stage_rows(k).total).max().unwrap_or(0);
    match (problem.input_dim(), rows) {
        (2, 16) => solve_sized::<2, 16>(problem, warm_start),
        (2, 14) => solve_sized::<2, 14>(problem, warm_start),
        (1, 14) => solve_sized::<1, 14>(problem, warm_start),
        (1, 12) => solve_sized::<1, 12>(problem, warm_start),
        other => unreachable!("no QP layout for {other:?}"),
    }
}

fn solve_sized<const NU: usize, const NC: usize>(problem: &OcpProblem, warm_start: Option<&OcpSolution>) -> OcpSolution {
    let started = Instant::now();
    let settings = problem.config.solver;
    let qp_settings = settings.qp();
    let n = problem.horizon();

    let (mut w, duals) = match warm_start {
        Some(prev) => problem.shifted_start(prev),
        None => (problem.cold_start(), None),
    };
    let mut duals = duals.unwrap_or_else(|| problem.zero_duals());
    let mut penalty: f64 = 1.0;
    let mut iterations = 0;
    let mut best: Option<(f64, Primal, Duals, f64)> = None;
    let mut last;

    let status = loop {
        let lin = problem.linearize(&w);
        let kkt = problem.kkt_residual(&w, &duals, &lin);
        trace!("sqp iteration {iterations}: kkt {kkt:.3e} cost {:.6e}", lin.cost);
        if best.as_ref().is_none_or(|b| kkt < b.0) {
            best = Some((kkt, w.clone(), duals.clone(), lin.cost));
        }
        last = (kkt, lin.cost);
        if kkt <= settings.kkt_tolerance {
            break SolveStatus::Converged;
        }
        if iterations >= settings.max_sqp_iterations {
            break SolveStatus::MaxIter;
        }

        let qp = problem.build_qp::<NU, NC>(&w, &duals, &lin);
        let sol = qp.solve(&qp_settings);
        iterations += 1;
        match sol.status {
            QpStatus::Solved => {}
            QpStatus::MaxIterations | QpStatus::NumericalFailure if sol.residual < 1e-6 => {}
            _ => break SolveStatus::InfeasibleQp,
        }

        let step = Primal {
            z: sol.x.clone(),
            u: (0..n)
                .map(|k| {
                    let mut v = InputVector::zeros();
                    v.fixed_rows_mut::<NU>(0).copy_from(&sol.u[k]);
                    v
                })
                .collect(),
            s: sol.s.iter().map(|s| [s[0], s[1]]).collect(),
        };

        let dual_max = sol
            .pi
            .iter()
            .map(|p| p.amax())
            .chain(sol.lambda.iter().map(|l| l.amax()))
            .fold(0.0, f64::max);
        penalty = penalty.max(1.1 * dual_max + 1.0);
        let (phi, violation) = problem.merit(&w, penalty);
        let slope = problem.cost_slope(&w, &lin, &step) - penalty * violation;

        // Steps whose predicted change is below rounding noise are accepted.
        let noise = 1e-12 * (1.0 + phi.abs());
        let mut alpha = 1.0;
        let mut trial = problem.take_step(&w, &step, alpha);
        while alpha > MIN_STEP {
            let (phi_trial, _) = problem.merit(&trial, penalty);
            if phi_trial <= phi + ARMIJO * alpha * slope.min(0.0) + noise {
                break;
            }
            alpha *= 0.5;
            trial = problem.take_step(&w, &step, alpha);
        }
        w = trial;
        for k in 0..n {
            duals.pi[k] = duals.pi[k] * (1.0 - alpha) + sol.pi[k] * alpha;
        }
        for k in 0..=n {
            let rows = duals.lam[k].len();
            let new = sol.lambda[k].rows(0, rows);
            duals.lam[k] = &duals.lam[k] * (1.0 - alpha) + new * alpha;
        }
    };

    let (kkt, w, duals, cost) = match status {
        SolveStatus::Converged => (last.0, w, duals, last.1),
        _ => best.expect("at least one iterate is evaluated"),
    };
    problem.package(&w, &duals, cost, kkt, iterations, status, started)
}
