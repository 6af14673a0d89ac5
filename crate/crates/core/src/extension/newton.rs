//! Newton polish of the discrete system `K v − b + D A(v) = 0` for
//! single-valued operators, with node Jacobians of `A` by central
//! differences and a backtracking line search on `‖F‖`.

use nalgebra::{DMatrix, DVector};

use super::assemble::Discretization;
use super::ExtensionProblem;
use crate::error::Result;
use crate::hilbert::HVector;
use crate::linalg::solve_block_tridiag;
use crate::monops::MonotoneOp;

const MAX_STEPS: usize = 60;

struct System<'a> {
    op: &'a dyn MonotoneOp,
    disc: &'a Discretization,
}

impl System<'_> {
    fn eval(&self, v: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let mut a = DMatrix::zeros(v.nrows(), v.ncols());
        for k in 0..v.ncols() {
            let vk: HVector = v.column(k).into_owned();
            let ak = self.op.direct_eval(&vk)?;
            if ak.iter().any(|x| !x.is_finite()) {
                return None;
            }
            a.set_column(k, &ak);
        }
        let mut f = self.disc.stiffness_residual(v);
        for (k, om) in self.disc.omega.iter().enumerate() {
            let mut col = f.column_mut(k);
            col += a.column(k) * *om;
        }
        Some((f, a))
    }

    fn node_jacobian(&self, v: &HVector) -> Option<DMatrix<f64>> {
        let d = v.len();
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let eps = 1e-7 * (1.0 + v[j].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += eps;
            vm[j] -= eps;
            let col = (self.op.direct_eval(&vp)? - self.op.direct_eval(&vm)?) / (2.0 * eps);
            jac.set_column(j, &col);
        }
        Some(jac)
    }
}

/// Newton from `v0` until the step stalls at rounding level. Returns the
/// final iterate when it reduced `‖F‖`; certification is left to the caller.
pub(crate) fn polish(
    problem: &ExtensionProblem,
    disc: &Discretization,
    v0: &DMatrix<f64>,
    step_tol: f64,
) -> Result<Option<(DMatrix<f64>, usize)>> {
    let op = problem.op.as_ref();
    if !op.is_single_valued() {
        return Ok(None);
    }
    let sys = System { op, disc };
    let n = disc.n_free();
    let d = v0.nrows();
    let mut v = v0.clone();
    let Some((mut f, _)) = sys.eval(&v) else {
        return Ok(None);
    };
    let f0 = f.norm();
    let mut fn_ = f0;
    let mut steps = 0;
    while steps < MAX_STEPS && fn_ > 0.0 {
        steps += 1;
        let mut blocks = Vec::with_capacity(n);
        for k in 0..n {
            let vk: HVector = v.column(k).into_owned();
            let Some(jk) = sys.node_jacobian(&vk) else {
                return Ok(None);
            };
            let mut b = jk * disc.omega[k];
            for i in 0..d {
                b[(i, i)] += disc.k_diag[k];
            }
            blocks.push(b);
        }
        let mut rhs: Vec<DVector<f64>> = (0..n).map(|k| f.column(k).into_owned()).collect();
        if solve_block_tridiag(blocks, &disc.k_off, &mut rhs).is_err() {
            break;
        }
        let step = DMatrix::from_columns(&rhs);
        let size = (0..n).map(|k| step.column(k).norm()).fold(0.0, f64::max);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let cand = &v - &step * t;
            if let Some((fc, _)) = sys.eval(&cand) {
                let fcn = fc.norm();
                if fcn < (1.0 - 1e-4 * t) * fn_ {
                    v = cand;
                    f = fc;
                    fn_ = fcn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || t * size <= step_tol {
            break;
        }
    }
    Ok((fn_ < f0).then_some((v, steps)))
}
