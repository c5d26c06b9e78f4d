//! Primal-dual interior-point solver for stage-structured convex QPs.
//!
//! The problem over stages `k = 0..=N` is
//!
//! ```text
//! min  Σ_k ½ xᵀQx + uᵀSx + ½ uᵀRu + qᵀx + rᵀu + ½ sᵀ diag(h_s) s + g_sᵀ s
//! s.t. x_{k+1} = A_k x_k + B_k u_k + c_k          k < N
//!      C_x x_k + C_u u_k + C_s s_k ≤ h_k
//!      x_0 = x̂_0
//! ```
//!
//! where `s_k` are stage-local variables that do not enter the dynamics.
//! Each Newton system is solved by eliminating `s_k` per stage and running a
//! Riccati recursion on `(x, u)`, so the cost per iteration is linear in `N`.
//! Search directions follow Mehrotra's predictor-corrector scheme.
//!
//! All dimensions are compile-time constants so the inner loops never touch
//! the heap. Stages that need fewer variables or rows than the constants are
//! padded: unused inputs and stage-local variables keep a unit Hessian and no
//! coupling, unused rows read `0 ≤ 1`. Both are exactly inert.

use nalgebra::{SMatrix, SVector};

#[derive(Debug, Clone)]
pub struct QpStage<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    pub q_xx: SMatrix<f64, NX, NX>,
    pub s_ux: SMatrix<f64, NU, NX>,
    pub r_uu: SMatrix<f64, NU, NU>,
    pub q: SVector<f64, NX>,
    pub r: SVector<f64, NU>,
    /// Diagonal Hessian of the stage-local variables; must be positive.
    pub slack_hess: SVector<f64, NS>,
    pub slack_grad: SVector<f64, NS>,
    /// Dynamics towards the next stage; ignored on the last stage.
    pub a: SMatrix<f64, NX, NX>,
    pub b: SMatrix<f64, NX, NU>,
    pub c: SVector<f64, NX>,
    pub c_x: SMatrix<f64, NC, NX>,
    pub c_u: SMatrix<f64, NC, NU>,
    pub c_s: SMatrix<f64, NC, NS>,
    pub h: SVector<f64, NC>,
}

impl<const NX: usize, const NU: usize, const NS: usize, const NC: usize> Default for QpStage<NX, NU, NS, NC> {
    /// Inert stage: unit Hessians on `u` and `s`, everything else zero and
    /// every row `0 ≤ 1`.
    fn default() -> Self {
        Self {
            q_xx: SMatrix::zeros(),
            s_ux: SMatrix::zeros(),
            r_uu: SMatrix::identity(),
            q: SVector::zeros(),
            r: SVector::zeros(),
            slack_hess: SVector::repeat(1.0),
            slack_grad: SVector::zeros(),
            a: SMatrix::zeros(),
            b: SMatrix::zeros(),
            c: SVector::zeros(),
            c_x: SMatrix::zeros(),
            c_u: SMatrix::zeros(),
            c_s: SMatrix::zeros(),
            h: SVector::repeat(1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageQp<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    pub stages: Vec<QpStage<NX, NU, NS, NC>>,
    pub x0: SVector<f64, NX>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Tolerance on stationarity, equality and inequality residuals, relative
    /// to `1 + max |linear cost term|`.
    pub residual_tol: f64,
    /// Tolerance on the average complementarity product, scaled the same way.
    pub gap_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 80,
            residual_tol: 1e-9,
            gap_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct QpSolution<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    pub x: Vec<SVector<f64, NX>>,
    pub u: Vec<SVector<f64, NU>>,
    pub s: Vec<SVector<f64, NS>>,
    /// Multipliers of `A x_k + B u_k + c − x_{k+1} = 0`.
    pub pi: Vec<SVector<f64, NX>>,
    /// Multipliers of the inequality rows, `≥ 0`.
    pub lambda: Vec<SVector<f64, NC>>,
    pub status: QpStatus,
    pub iterations: usize,
    pub residual: f64,
    pub gap: f64,
}

#[derive(Clone)]
struct Iterate<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    x: Vec<SVector<f64, NX>>,
    u: Vec<SVector<f64, NU>>,
    s: Vec<SVector<f64, NS>>,
    pi: Vec<SVector<f64, NX>>,
    lam: Vec<SVector<f64, NC>>,
    t: Vec<SVector<f64, NC>>,
}

type Direction<const NX: usize, const NU: usize, const NS: usize, const NC: usize> = Iterate<NX, NU, NS, NC>;

struct Residuals<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    rx: Vec<SVector<f64, NX>>,
    ru: Vec<SVector<f64, NU>>,
    rs: Vec<SVector<f64, NS>>,
    re: Vec<SVector<f64, NX>>,
    rp: Vec<SVector<f64, NC>>,
}

fn amax<const D: usize>(v: &[SVector<f64, D>]) -> f64 {
    v.iter().map(|x| x.amax()).fold(0.0, f64::max)
}

impl<const NX: usize, const NU: usize, const NS: usize, const NC: usize> Residuals<NX, NU, NS, NC> {
    fn norms(&self) -> (f64, f64, f64) {
        // rx[0] is the free multiplier of the pinned initial state.
        let dual = amax(&self.rx[1..]).max(amax(&self.ru)).max(amax(&self.rs));
        (dual, amax(&self.re), amax(&self.rp))
    }
}

/// Per-stage factorisation of one Newton system.
struct Factor<const NX: usize, const NU: usize, const NS: usize, const NC: usize> {
    hss_inv: Vec<SMatrix<f64, NS, NS>>,
    hsx: Vec<SMatrix<f64, NS, NX>>,
    hsu: Vec<SMatrix<f64, NS, NU>>,
    sigma: Vec<SVector<f64, NC>>,
    p: Vec<SMatrix<f64, NX, NX>>,
    k: Vec<SMatrix<f64, NU, NX>>,
    rbar_inv: Vec<SMatrix<f64, NU, NU>>,
    sbar: Vec<SMatrix<f64, NU, NX>>,
}

fn scale_rows<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>, d: &SVector<f64, R>) -> SMatrix<f64, R, C> {
    let mut out = *m;
    for i in 0..R {
        for j in 0..C {
            out[(i, j)] *= d[i];
        }
    }
    out
}

fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix. Schur complements of
/// badly scaled systems can lose definiteness to rounding; a growing
/// diagonal shift recovers a usable (inexact) Newton matrix.
fn spd_inverse<const D: usize>(m: SMatrix<f64, D, D>) -> Option<SMatrix<f64, D, D>> {
    if D == 0 {
        return Some(m);
    }
    if let Some(c) = m.cholesky() {
        return Some(c.inverse());
    }
    let scale = 1.0 + m.diagonal().amax();
    let mut shift = 1e-12 * scale;
    while shift < 1e-4 * scale {
        let shifted = m + SMatrix::<f64, D, D>::identity() * shift;
        if let Some(c) = shifted.cholesky() {
            return Some(c.inverse());
        }
        shift *= 100.0;
    }
    None
}

impl<const NX: usize, const NU: usize, const NS: usize, const NC: usize> StageQp<NX, NU, NS, NC> {
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    fn residuals(&self, it: &Iterate<NX, NU, NS, NC>) -> Residuals<NX, NU, NS, NC> {
        let n = self.horizon();
        let mut out = Residuals {
            rx: Vec::with_capacity(n + 1),
            ru: Vec::with_capacity(n + 1),
            rs: Vec::with_capacity(n + 1),
            re: Vec::with_capacity(n),
            rp: Vec::with_capacity(n + 1),
        };
        for (k, st) in self.stages.iter().enumerate() {
            let (x, u, s, lam) = (&it.x[k], &it.u[k], &it.s[k], &it.lam[k]);
            let mut rx = st.q_xx * x + st.s_ux.tr_mul(u) + st.q + st.c_x.tr_mul(lam);
            let mut ru = st.s_ux * x + st.r_uu * u + st.r + st.c_u.tr_mul(lam);
            let rs = st.slack_hess.component_mul(s) + st.slack_grad + st.c_s.tr_mul(lam);
            if k < n {
                rx += st.a.tr_mul(&it.pi[k]);
                ru += st.b.tr_mul(&it.pi[k]);
                out.re.push(st.a * x + st.b * u + st.c - it.x[k + 1]);
            }
            if k > 0 {
                rx -= it.pi[k - 1];
            }
            out.rp.push(st.c_x * x + st.c_u * u + st.c_s * s + it.t[k] - st.h);
            out.rx.push(rx);
            out.ru.push(ru);
            out.rs.push(rs);
        }
        out
    }

    fn factorize(&self, it: &Iterate<NX, NU, NS, NC>) -> Option<Factor<NX, NU, NS, NC>> {
        let sigma: Vec<_> = it.lam.iter().zip(&it.t).map(|(l, t)| l.component_div(t)).collect();
        if let Some(f) = self.factorize_weighted(sigma.clone()) {
            return Some(f);
        }
        // Huge row weights make the Schur complements cancel
        // catastrophically; capped weights still give a descent direction.
        ROW_WEIGHT_CAPS.iter().find_map(|&cap| {
            let capped = sigma.iter().map(|s| s.map(|w| w.min(cap))).collect();
            self.factorize_weighted(capped)
        })
    }

    /// Factorises the Newton system with row weights `sigma`.
    fn factorize_weighted(&self, sigmas: Vec<SVector<f64, NC>>) -> Option<Factor<NX, NU, NS, NC>> {
        let n = self.horizon();
        let mut f = Factor {
            hss_inv: Vec::with_capacity(n + 1),
            hsx: Vec::with_capacity(n + 1),
            hsu: Vec::with_capacity(n + 1),
            sigma: Vec::with_capacity(n + 1),
            p: vec![SMatrix::zeros(); n + 1],
            k: vec![SMatrix::zeros(); n + 1],
            rbar_inv: vec![SMatrix::zeros(); n + 1],
            sbar: vec![SMatrix::zeros(); n + 1],
        };
        let mut reduced = Vec::with_capacity(n + 1);
        for (st, sigma) in self.stages.iter().zip(sigmas) {
            let scx = scale_rows(&st.c_x, &sigma);
            let scu = scale_rows(&st.c_u, &sigma);
            let scs = scale_rows(&st.c_s, &sigma);
            let mut hxx = st.q_xx + st.c_x.tr_mul(&scx);
            let mut hux = st.s_ux + st.c_u.tr_mul(&scx);
            let mut huu = st.r_uu + st.c_u.tr_mul(&scu);
            let hsx = st.c_s.tr_mul(&scx);
            let hsu = st.c_s.tr_mul(&scu);
            let mut hss = st.c_s.tr_mul(&scs);
            for i in 0..NS {
                hss[(i, i)] += st.slack_hess[i];
            }
            let hss_inv = spd_inverse(hss)?;
            let tx = hss_inv * hsx;
            let tu = hss_inv * hsu;
            hxx -= hsx.tr_mul(&tx);
            hux -= hsu.tr_mul(&tx);
            huu -= hsu.tr_mul(&tu);
            reduced.push((hxx, hux, huu));
            f.hss_inv.push(hss_inv);
            f.hsx.push(hsx);
            f.hsu.push(hsu);
            f.sigma.push(sigma);
        }

        // Inputs of the last stage have no dynamics; eliminate them locally.
        let (hxx, hux, huu) = &reduced[n];
        let rbar_inv = spd_inverse(symmetrize(huu))?;
        let gain = -(rbar_inv * hux);
        f.p[n] = symmetrize(&(hxx + hux.tr_mul(&gain)));
        f.k[n] = gain;
        f.rbar_inv[n] = rbar_inv;
        f.sbar[n] = *hux;
        for k in (0..n).rev() {
            let st = &self.stages[k];
            let (hxx, hux, huu) = &reduced[k];
            let p_next = &f.p[k + 1];
            let pb = p_next * st.b;
            let rbar = symmetrize(&(huu + st.b.tr_mul(&pb)));
            let sbar = hux + pb.tr_mul(&st.a);
            let rbar_inv = spd_inverse(rbar)?;
            let gain = -(rbar_inv * sbar);
            let pa = p_next * st.a;
            let pk = hxx + st.a.tr_mul(&pa) + sbar.tr_mul(&gain);
            f.p[k] = symmetrize(&pk);
            f.k[k] = gain;
            f.rbar_inv[k] = rbar_inv;
            f.sbar[k] = sbar;
        }
        Some(f)
    }

    /// Solves the Newton system for complementarity target `rc` (the desired
    /// value of the `λ∘t` residual).
    fn newton_direction(
        &self,
        it: &Iterate<NX, NU, NS, NC>,
        res: &Residuals<NX, NU, NS, NC>,
        f: &Factor<NX, NU, NS, NC>,
        rc: &[SVector<f64, NC>],
    ) -> Direction<NX, NU, NS, NC> {
        let n = self.horizon();
        // w = (λ∘r_p − r_c) / t
        let w: Vec<SVector<f64, NC>> = (0..=n)
            .map(|k| (it.lam[k].component_mul(&res.rp[k]) - rc[k]).component_div(&it.t[k]))
            .collect();
        let mut gx = Vec::with_capacity(n + 1);
        let mut gu = Vec::with_capacity(n + 1);
        let mut gs = Vec::with_capacity(n + 1);
        for (k, st) in self.stages.iter().enumerate() {
            let gsk = res.rs[k] + st.c_s.tr_mul(&w[k]);
            let t = f.hss_inv[k] * gsk;
            gx.push(res.rx[k] + st.c_x.tr_mul(&w[k]) - f.hsx[k].tr_mul(&t));
            gu.push(res.ru[k] + st.c_u.tr_mul(&w[k]) - f.hsu[k].tr_mul(&t));
            gs.push(gsk);
        }

        let mut p_vec = vec![SVector::<f64, NX>::zeros(); n + 1];
        let mut kff = vec![SVector::<f64, NU>::zeros(); n + 1];
        kff[n] = -(f.rbar_inv[n] * gu[n]);
        p_vec[n] = gx[n] + f.sbar[n].tr_mul(&kff[n]);
        for k in (0..n).rev() {
            let st = &self.stages[k];
            let carry = f.p[k + 1] * res.re[k] + p_vec[k + 1];
            let rbar = gu[k] + st.b.tr_mul(&carry);
            let ff = -(f.rbar_inv[k] * rbar);
            p_vec[k] = gx[k] + st.a.tr_mul(&carry) + f.sbar[k].tr_mul(&ff);
            kff[k] = ff;
        }

        let mut dx = Vec::with_capacity(n + 1);
        let mut du = Vec::with_capacity(n + 1);
        let mut dpi = Vec::with_capacity(n);
        dx.push(self.x0 - it.x[0]);
        for k in 0..n {
            let st = &self.stages[k];
            let uk = f.k[k] * dx[k] + kff[k];
            let next = st.a * dx[k] + st.b * uk + res.re[k];
            dpi.push(f.p[k + 1] * next + p_vec[k + 1]);
            du.push(uk);
            dx.push(next);
        }
        du.push(f.k[n] * dx[n] + kff[n]);

        let mut ds = Vec::with_capacity(n + 1);
        let mut dlam = Vec::with_capacity(n + 1);
        let mut dt = Vec::with_capacity(n + 1);
        for (k, st) in self.stages.iter().enumerate() {
            let sk = -(f.hss_inv[k] * (gs[k] + f.hsx[k] * dx[k] + f.hsu[k] * du[k]));
            let g_dy = st.c_x * dx[k] + st.c_u * du[k] + st.c_s * sk;
            dlam.push(f.sigma[k].component_mul(&g_dy) + w[k]);
            dt.push(-res.rp[k] - g_dy);
            ds.push(sk);
        }
        Direction {
            x: dx,
            u: du,
            s: ds,
            pi: dpi,
            lam: dlam,
            t: dt,
        }
    }

    pub fn solve(&self, settings: &QpSettings) -> QpSolution<NX, NU, NS, NC> {
        let n = self.horizon();
        let mut it = Iterate {
            x: vec![SVector::zeros(); n + 1],
            u: vec![SVector::zeros(); n + 1],
            s: vec![SVector::zeros(); n + 1],
            pi: vec![SVector::zeros(); n],
            lam: vec![SVector::repeat(1.0); n + 1],
            t: self.stages.iter().map(|s| s.h.map(|h| h.max(1.0))).collect(),
        };
        it.x[0] = self.x0;
        let m = ((n + 1) * NC).max(1) as f64;
        // Tolerances are relative to the size of the linear terms.
        let scale = 1.0
            + self
                .stages
                .iter()
                .map(|st| st.q.amax().max(st.r.amax()).max(st.slack_grad.amax()))
                .fold(0.0, f64::max);

        let mut status = QpStatus::MaxIterations;
        let mut iterations = 0;
        let mut res = self.residuals(&it);
        let mut residual;
        let mut gap;
        loop {
            let (rd, re, rp) = res.norms();
            residual = rd.max(re).max(rp);
            gap = dot_all(&it.lam, &it.t) / m;
            if residual <= settings.residual_tol * scale && gap <= settings.gap_tol * scale {
                status = QpStatus::Solved;
                break;
            }
            if iterations >= settings.max_iterations {
                if rp > 1e-6 || re > 1e-6 {
                    status = QpStatus::Infeasible;
                }
                break;
            }
            if it.lam.iter().any(|l| l.amax() > 1e14) {
                status = QpStatus::Infeasible;
                break;
            }
            let Some(factor) = self.factorize(&it) else {
                status = QpStatus::NumericalFailure;
                break;
            };

            // Predictor.
            let rc_aff: Vec<_> = (0..=n).map(|k| it.lam[k].component_mul(&it.t[k])).collect();
            let aff = self.newton_direction(&it, &res, &factor, &rc_aff);
            let alpha_aff = step_to_boundary(&it, &aff, 1.0);
            let gap_aff = (0..=n)
                .map(|k| (it.lam[k] + aff.lam[k] * alpha_aff).dot(&(it.t[k] + aff.t[k] * alpha_aff)))
                .sum::<f64>()
                / m;
            let sigma = (gap_aff / gap.max(f64::MIN_POSITIVE)).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let rc: Vec<_> = (0..=n)
                .map(|k| {
                    let v = it.lam[k].component_mul(&it.t[k]) + aff.lam[k].component_mul(&aff.t[k]);
                    v.add_scalar(-sigma * gap)
                })
                .collect();
            let dir = self.newton_direction(&it, &res, &factor, &rc);
            let alpha = step_to_boundary(&it, &dir, 0.995);
            apply(&mut it, &dir, alpha);
            iterations += 1;
            res = self.residuals(&it);
        }

        if let Some(polished) = (status == QpStatus::Solved)
            .then(|| self.polish(&it, settings.residual_tol * scale))
            .flatten()
        {
            it = polished;
            res = self.residuals(&it);
            let (rd, re, rp) = res.norms();
            residual = rd.max(re).max(rp);
            gap = dot_all(&it.lam, &it.t) / m;
        }

        QpSolution {
            x: it.x,
            u: it.u,
            s: it.s,
            pi: it.pi,
            lambda: it.lam,
            status,
            iterations,
            residual,
            gap,
        }
    }
}

const ROW_WEIGHT_CAPS: [f64; 3] = [1e14, 1e12, 1e10];
const POLISH_PENALTY: f64 = 1e8;
const POLISH_ITERATIONS: usize = 12;
const POLISH_ROUNDS: usize = 4;

impl<const NX: usize, const NU: usize, const NS: usize, const NC: usize> StageQp<NX, NU, NS, NC> {
    fn rows(&self, it: &Iterate<NX, NU, NS, NC>, k: usize) -> SVector<f64, NC> {
        let st = &self.stages[k];
        st.c_x * it.x[k] + st.c_u * it.u[k] + st.c_s * it.s[k] - st.h
    }

    /// Interior points stop short of weakly active bounds. Guessing the
    /// active set from `λ > t` and solving the equality-constrained problem
    /// by the method of multipliers lands exactly on them. Returns `None`
    /// when the guess does not give a KKT point at least as good.
    fn polish(&self, it: &Iterate<NX, NU, NS, NC>, tol: f64) -> Option<Iterate<NX, NU, NS, NC>> {
        let n = self.horizon();
        let mut active: Vec<[bool; NC]> = (0..=n)
            .map(|k| std::array::from_fn(|i| it.lam[k][i] > it.t[k][i]))
            .collect();
        for _ in 0..POLISH_ROUNDS {
            let (mut y, lam) = self.solve_active_set(it, &active)?;
            let mut changed = false;
            for k in 0..=n {
                let g = self.rows(&y, k);
                for i in 0..NC {
                    if active[k][i] && lam[k][i] < -tol {
                        active[k][i] = false;
                        changed = true;
                    } else if !active[k][i] && g[i] > tol {
                        active[k][i] = true;
                        changed = true;
                    }
                }
                y.lam[k] = lam[k].map(|l| l.max(0.0));
                y.t[k] = (-g).map(|t| t.max(0.0));
            }
            if !changed {
                let (rd, re, rp) = self.residuals(&y).norms();
                return (rd <= tol && re <= tol && rp <= tol).then_some(y);
            }
        }
        None
    }

    /// Treats the rows flagged in `active` as equalities and drops the rest,
    /// solved by the method of multipliers on one factorisation. Returns the
    /// primal point and the row multipliers.
    #[allow(clippy::type_complexity)]
    fn solve_active_set(
        &self,
        it: &Iterate<NX, NU, NS, NC>,
        active: &[[bool; NC]],
    ) -> Option<(Iterate<NX, NU, NS, NC>, Vec<SVector<f64, NC>>)> {
        let n = self.horizon();
        let sigma: Vec<SVector<f64, NC>> = self
            .stages
            .iter()
            .zip(active)
            .map(|(st, act)| {
                SVector::from_fn(|i, _| {
                    if !act[i] {
                        return 0.0;
                    }
                    let norm2 = st.c_x.row(i).norm_squared()
                        + st.c_u.row(i).norm_squared()
                        + st.c_s.row(i).norm_squared();
                    POLISH_PENALTY / norm2.max(1e-12)
                })
            })
            .collect();
        let factor = self.factorize_weighted(sigma.clone())?;

        let mut y = it.clone();
        y.t = vec![SVector::repeat(1.0); n + 1];
        let mut lam: Vec<SVector<f64, NC>> = (0..=n)
            .map(|k| it.lam[k].zip_map(&sigma[k], |l, w| if w > 0.0 { l } else { 0.0 }))
            .collect();
        for _ in 0..POLISH_ITERATIONS {
            for k in 0..=n {
                y.lam[k] = lam[k] + sigma[k].component_mul(&self.rows(&y, k));
            }
            let res = self.residuals(&y);
            let rc: Vec<_> = (0..=n).map(|k| y.lam[k].component_mul(&res.rp[k])).collect();
            let dir = self.newton_direction(&y, &res, &factor, &rc);
            let primal = Direction {
                lam: vec![SVector::zeros(); n + 1],
                t: vec![SVector::zeros(); n + 1],
                ..dir
            };
            apply(&mut y, &primal, 1.0);
            for k in 0..=n {
                lam[k] += sigma[k].component_mul(&self.rows(&y, k));
            }
        }
        Some((y, lam))
    }
}

fn dot_all<const D: usize>(a: &[SVector<f64, D>], b: &[SVector<f64, D>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn step_to_boundary<const NX: usize, const NU: usize, const NS: usize, const NC: usize>(
    it: &Iterate<NX, NU, NS, NC>,
    dir: &Direction<NX, NU, NS, NC>,
    fraction: f64,
) -> f64 {
    let mut alpha: f64 = 1.0;
    for (vals, deltas) in [(&it.lam, &dir.lam), (&it.t, &dir.t)] {
        for (v, d) in vals.iter().zip(deltas.iter()) {
            for (vi, di) in v.iter().zip(d.iter()) {
                if *di < 0.0 {
                    alpha = alpha.min(-fraction * vi / di);
                }
            }
        }
    }
    alpha.min(1.0)
}

fn apply<const NX: usize, const NU: usize, const NS: usize, const NC: usize>(
    it: &mut Iterate<NX, NU, NS, NC>,
    dir: &Direction<NX, NU, NS, NC>,
    alpha: f64,
) {
    fn add<const D: usize>(dst: &mut [SVector<f64, D>], src: &[SVector<f64, D>], alpha: f64) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s * alpha;
        }
    }
    add(&mut it.x, &dir.x, alpha);
    add(&mut it.u, &dir.u, alpha);
    add(&mut it.s, &dir.s, alpha);
    add(&mut it.pi, &dir.pi, alpha);
    add(&mut it.lam, &dir.lam, alpha);
    add(&mut it.t, &dir.t, alpha);
}
