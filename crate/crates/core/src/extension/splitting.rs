//! Douglas–Rachford splitting in the `D`-weighted metric:
//!
//! ```text
//! v = J_μ^A(x)                      node-wise resolvent
//! u = (D + μK)⁻¹ (D(2v − x) + μb)   one tridiagonal factorization
//! x ← x + ρ(u − v)
//! ```
//!
//! accelerated by safeguarded Anderson mixing on `x`. For single-valued
//! operators a Newton polish takes over after a short warm-up.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::assemble::Discretization;
use super::newton;
use super::{ExtensionProblem, RawSolution};
use crate::error::Result;
use crate::hilbert::HVector;
use crate::linalg::SymTridiag;
use crate::monops::{resolve, MonotoneOp};

/// Iterations without a new best residual before Anderson memory is dropped.
const STALL_RESTART: usize = 50;
/// Splitting iterations before a Newton polish is attempted (single-valued operators).
const NEWTON_AFTER: usize = 20;

pub(crate) fn run(
    problem: &ExtensionProblem,
    disc: &Discretization,
    guess: Option<&[HVector]>,
) -> Result<RawSolution> {
    let op = problem.op.as_ref();
    let cfg = &problem.cfg;
    let (mu, rho) = (cfg.mu, cfg.relaxation);
    let n = disc.n_free();
    let diag: Vec<f64> = disc
        .omega
        .iter()
        .zip(&disc.k_diag)
        .map(|(w, k)| w + mu * k)
        .collect();
    let off: Vec<f64> = disc.k_off.iter().map(|k| mu * k).collect();
    let fac = SymTridiag::factor(&diag, &off)?;
    // stop when the fixed-point gap certifies the inclusion residual (at most 3× the gap)
    let target = cfg.tol * (1.0 + problem.phi().norm()) / 3.0;

    let mut x = match guess {
        Some(g) => {
            let mut x = DMatrix::zeros(disc.y.len(), n);
            for k in 0..n {
                x.set_column(k, &g[disc.start + k]);
            }
            x
        }
        None => disc.initial_guess(problem),
    };

    let mut aa = Anderson::new(cfg.anderson);
    // (gap, next iterate, u, selection)
    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut since_best = 0;
    let mut newton_steps = 0;
    for it in 1..=cfg.max_iters {
        let v = nodewise_resolvent(op, mu, &x)?;
        let u = linear_step(disc, &fac, mu, &v, &x);
        let gap = max_col_dist(&u, &v);
        // equals -D⁻¹(Ku − b) without the cancellation near the origin
        let w = (&x - &v + &u - &v) / mu;
        if gap <= target || it == cfg.max_iters {
            let (gap, u, w) = match best {
                Some((g, _, bu, bw)) if g < gap => (g, bu, bw),
                _ => (gap, u, w),
            };
            return Ok(RawSolution {
                v: u,
                w,
                iterations: it + newton_steps,
                converged: gap <= target,
                certified_tol: cfg.tol,
            });
        }
        if it == NEWTON_AFTER {
            if let Some((nv, steps)) = newton::polish(problem, disc, &u, 1e-3 * target)? {
                // restart the splitting at x = v + μ A(v), whose resolvent is v
                newton_steps = steps;
                x = nodewise_shift(op, mu, &nv)?;
                aa.clear();
                best = None;
                continue;
            }
        }
        let f = (&u - &v) * rho;
        let plain = &x + &f;
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, plain.clone(), u, w));
            since_best = 0;
        } else {
            since_best += 1;
        }
        let blown = best.as_ref().is_some_and(|b| gap > 1e2 * b.0);
        if blown || since_best > STALL_RESTART {
            aa.clear();
            since_best = 0;
            x = best.as_ref().unwrap().1.clone();
            continue;
        }
        x = aa.next(&x, &f).unwrap_or(plain);
    }
    unreachable!("loop returns at max_iters")
}

fn nodewise_resolvent(op: &dyn MonotoneOp, mu: f64, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut v = DMatrix::zeros(x.nrows(), x.ncols());
    for k in 0..x.ncols() {
        let col: HVector = x.column(k).into_owned();
        v.set_column(k, &resolve(op, mu, &col)?);
    }
    Ok(v)
}

fn nodewise_shift(op: &dyn MonotoneOp, mu: f64, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = v.clone();
    for k in 0..v.ncols() {
        let col: HVector = v.column(k).into_owned();
        let a = op
            .direct_eval(&col)
            .ok_or_else(|| crate::error::Error::param("operator", "selection unavailable"))?;
        x.set_column(k, &(col + a * mu));
    }
    Ok(x)
}

fn linear_step(
    disc: &Discretization,
    fac: &SymTridiag,
    mu: f64,
    v: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (d, n) = (x.nrows(), x.ncols());
    let mut u = DMatrix::zeros(d, n);
    let mut row = vec![0.0; n];
    for r in 0..d {
        for k in 0..n {
            row[k] = disc.omega[k] * (2.0 * v[(r, k)] - x[(r, k)]) + mu * disc.b[(r, k)];
        }
        fac.solve_in_place(&mut row);
        for k in 0..n {
            u[(r, k)] = row[k];
        }
    }
    u
}

fn max_col_dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|k| (a.column(k) - b.column(k)).norm())
        .fold(0.0, f64::max)
}

/// Type-II Anderson mixing with regularized normal equations.
struct Anderson {
    depth: usize,
    dx: VecDeque<DVector<f64>>,
    df: VecDeque<DVector<f64>>,
    prev: Option<(DVector<f64>, DVector<f64>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            dx: VecDeque::new(),
            df: VecDeque::new(),
            prev: None,
        }
    }

    fn clear(&mut self) {
        self.dx.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Mixed iterate from `x` and its fixed-point residual `f`; `None` means take the plain step.
    fn next(&mut self, x: &DMatrix<f64>, f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        if self.depth == 0 {
            return None;
        }
        let xv = DVector::from_column_slice(x.as_slice());
        let fv = DVector::from_column_slice(f.as_slice());
        if let Some((px, pf)) = self.prev.take() {
            self.dx.push_back(&xv - px);
            self.df.push_back(&fv - pf);
            if self.dx.len() > self.depth {
                self.dx.pop_front();
                self.df.pop_front();
            }
        }
        self.prev = Some((xv.clone(), fv.clone()));
        let m = self.df.len();
        if m == 0 {
            return None;
        }
        let mut gram = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            rhs[i] = self.df[i].dot(&fv);
            for j in 0..=i {
                let g = self.df[i].dot(&self.df[j]);
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let reg = 1e-12 * gram.trace().max(f64::MIN_POSITIVE);
        for i in 0..m {
            gram[(i, i)] += reg;
        }
        let gamma = gram.cholesky()?.solve(&rhs);
        if gamma.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let mut next = &xv + &fv;
        for i in 0..m {
            next -= (&self.dx[i] + &self.df[i]) * gamma[i];
        }
        Some(DMatrix::from_column_slice(
            x.nrows(),
            x.ncols(),
            next.as_slice(),
        ))
    }
}
