//! Regularization path: for each `(λ_k, δ_k)` solve
//!
//! ```text
//! K v − b + D (A_λ v + δ (v − y)) = 0
//! ```
//!
//! by damped Newton (block tridiagonal Jacobian, node blocks of `A_λ` by
//! central differences), warm-started along the schedule, then extrapolate
//! the last two stages linearly to `λ = δ = 0`.

use nalgebra::{DMatrix, DVector};

use super::assemble::Discretization;
use super::{ExtensionProblem, RawSolution};
use crate::error::{Error, Result};
use crate::hilbert::HVector;
use crate::linalg::{solve_block_tridiag, SymTridiag};
use crate::monops::{resolve, yosida_stable, MonotoneOp};

const NEWTON_MAX: usize = 100;
const PICARD_MAX: usize = 5000;

pub(crate) fn run(
    problem: &ExtensionProblem,
    disc: &Discretization,
    guess: Option<&[HVector]>,
) -> Result<RawSolution> {
    let cfg = &problem.cfg;
    let sched = &cfg.schedule;
    let initial = match guess {
        Some(g) => DMatrix::from_columns(&g[disc.start..disc.start + disc.n_free()]),
        None => disc.initial_guess(problem),
    };
    let step_tol = 1e-3 * cfg.tol * (1.0 + problem.phi().norm());
    let mut v = initial.clone();
    let mut iterations = 0;
    let mut all_ok = true;
    let mut stages: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::with_capacity(2);
    for (&lam, &del) in sched.lambdas.iter().zip(&sched.deltas) {
        if !sched.warm_start {
            v = initial.clone();
        }
        let stage = Stage {
            op: problem.op.as_ref(),
            disc,
            lambda: lam,
            delta: del,
        };
        let (vk, its, ok) = stage.solve(v, step_tol)?;
        iterations += its;
        all_ok &= ok;
        let wk = stage.selection(&vk)?;
        v = vk.clone();
        stages.push((vk, wk));
        if stages.len() > 2 {
            stages.remove(0);
        }
    }
    let n = sched.lambdas.len();
    let (l1, l0) = (sched.lambdas[n - 1], sched.lambdas[n - 2]);
    let theta = l1 / (l0 - l1);
    let (v1, w1) = &stages[1];
    let (v0, w0) = &stages[0];
    let v_ext = v1 + (v1 - v0) * theta;
    let w_ext = w1 + (w1 - w0) * theta;
    Ok(RawSolution {
        v: v_ext,
        w: w_ext,
        iterations,
        converged: all_ok,
        certified_tol: cfg.tol + 5.0 * (l1 + sched.deltas[n - 1]),
    })
}

/// Solution of a single regularized stage `(λ, δ)` on the free nodes.
pub(crate) fn stage_solution(
    problem: &ExtensionProblem,
    disc: &Discretization,
    lambda: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let stage = Stage {
        op: problem.op.as_ref(),
        disc,
        lambda,
        delta,
    };
    let step_tol = 1e-3 * problem.cfg.tol * (1.0 + problem.phi().norm());
    let (v, its, ok) = stage.solve(disc.initial_guess(problem), step_tol)?;
    if !ok {
        let r = stage.residual(&v)?.norm();
        return Err(Error::NonConvergence {
            what: format!("regularized stage (lambda={lambda}, delta={delta})"),
            iterations: its,
            residual: r,
        });
    }
    Ok(v)
}

struct Stage<'a> {
    op: &'a dyn MonotoneOp,
    disc: &'a Discretization,
    lambda: f64,
    delta: f64,
}

impl Stage<'_> {
    /// `A_λ v + δ (v − y)`, node-wise.
    fn selection(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut w = DMatrix::zeros(v.nrows(), v.ncols());
        for k in 0..v.ncols() {
            let vk: HVector = v.column(k).into_owned();
            let a = yosida_stable(self.op, self.lambda, &vk)?;
            w.set_column(k, &(a + (vk - &self.disc.y) * self.delta));
        }
        Ok(w)
    }

    fn residual(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut r = self.disc.stiffness_residual(v);
        let w = self.selection(v)?;
        for (k, om) in self.disc.omega.iter().enumerate() {
            let mut col = r.column_mut(k);
            col += w.column(k) * *om;
        }
        Ok(r)
    }

    fn node_jacobian(&self, v: &HVector) -> Result<DMatrix<f64>> {
        let d = v.len();
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let eps = 1e-7 * (1.0 + v[j].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += eps;
            vm[j] -= eps;
            let col = (yosida_stable(self.op, self.lambda, &vp)?
                - yosida_stable(self.op, self.lambda, &vm)?)
                / (2.0 * eps);
            jac.set_column(j, &col);
        }
        Ok(jac)
    }

    /// Damped Newton; falls back to the contractive Picard map when Newton stalls.
    fn solve(&self, mut v: DMatrix<f64>, step_tol: f64) -> Result<(DMatrix<f64>, usize, bool)> {
        let disc = self.disc;
        let n = disc.n_free();
        let d = v.nrows();
        let mut r = self.residual(&v)?;
        let mut rn = r.norm();
        for it in 1..=NEWTON_MAX {
            let mut blocks = Vec::with_capacity(n);
            for k in 0..n {
                let vk: HVector = v.column(k).into_owned();
                let mut b = self.node_jacobian(&vk)? * disc.omega[k];
                for i in 0..d {
                    b[(i, i)] += disc.k_diag[k] + disc.omega[k] * self.delta;
                }
                blocks.push(b);
            }
            let mut rhs: Vec<DVector<f64>> = (0..n).map(|k| r.column(k).into_owned()).collect();
            if solve_block_tridiag(blocks, &disc.k_off, &mut rhs).is_err() {
                break;
            }
            let step = DMatrix::from_columns(&rhs);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &v - &step * t;
                let rc = self.residual(&cand)?;
                let rcn = rc.norm();
                if rcn <= (1.0 - 1e-4 * t) * rn || rcn == 0.0 {
                    v = cand;
                    r = rc;
                    rn = rcn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let moved = t * max_col_norm(&step);
            if moved <= step_tol {
                return Ok((v, it, true));
            }
            if !accepted {
                // no decrease possible at machine precision: accept if the full step is tiny
                return Ok((v, it, max_col_norm(&step) <= 1e3 * step_tol));
            }
        }
        self.picard(v, step_tol)
    }

    /// `v ← (K + (1/λ + δ) D)⁻¹ (b + D (J_λ v / λ + δ y))`, contraction factor `1/(1 + λδ)`.
    fn picard(&self, mut v: DMatrix<f64>, step_tol: f64) -> Result<(DMatrix<f64>, usize, bool)> {
        let disc = self.disc;
        let n = disc.n_free();
        let (il, del) = (1.0 / self.lambda, self.delta);
        let diag: Vec<f64> = (0..n)
            .map(|k| disc.k_diag[k] + (il + del) * disc.omega[k])
            .collect();
        let fac = SymTridiag::factor(&diag, &disc.k_off)?;
        let contraction = 1.0 / (1.0 + self.lambda * self.delta);
        let mut row = vec![0.0; n];
        for it in 1..=PICARD_MAX {
            let mut j = DMatrix::zeros(v.nrows(), n);
            for k in 0..n {
                let vk: HVector = v.column(k).into_owned();
                j.set_column(k, &resolve(self.op, self.lambda, &vk)?);
            }
            let mut next = DMatrix::zeros(v.nrows(), n);
            for r in 0..v.nrows() {
                for k in 0..n {
                    row[k] = disc.b[(r, k)] + disc.omega[k] * (il * j[(r, k)] + del * disc.y[r]);
                }
                fac.solve_in_place(&mut row);
                for k in 0..n {
                    next[(r, k)] = row[k];
                }
            }
            let moved = max_col_norm(&(&next - &v));
            v = next;
            // a-posteriori error bound of a contraction
            if moved * contraction / (1.0 - contraction) <= step_tol {
                return Ok((v, NEWTON_MAX + it, true));
            }
        }
        Ok((v, NEWTON_MAX + PICARD_MAX, false))
    }
}

fn max_col_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|k| a.column(k).norm())
        .fold(0.0, f64::max)
}
