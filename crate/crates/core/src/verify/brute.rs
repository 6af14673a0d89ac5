//! Reference solutions of the discrete Dirichlet extension problem on small
//! meshes: the full nonlinear system is assembled here from scratch and
//! solved by damped Newton with a dense Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{GridFunction, HVector};
use crate::mesh::{FarBc, FracParams, ZMesh};
use crate::monops::{resolve, MonotoneOp};

const MAX_UNKNOWNS: usize = 200;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone)]
pub struct BruteForceSolution {
    pub v: GridFunction,
    /// `max_i ‖v_i − J_1(v_i + w_i)‖` with `w_i = −(Kv − b)_i / ω_i`.
    pub residual: f64,
    pub iterations: usize,
}

struct System<'a> {
    op: &'a dyn MonotoneOp,
    z: &'a [f64],
    omega: Vec<f64>,
    phi: HVector,
    far: Option<HVector>,
}

impl System<'_> {
    fn node(&self, x: &DVector<f64>, i: usize) -> HVector {
        let d = self.phi.len();
        let last = self.z.len() - 1;
        if i == 0 {
            self.phi.clone()
        } else if i == last && self.far.is_some() {
            self.far.clone().unwrap()
        } else {
            x.rows((i - 1) * d, d).into_owned()
        }
    }

    fn free(&self) -> usize {
        self.z.len() - 1 - usize::from(self.far.is_some())
    }

    /// `(Kv − b)_i` written as differences, `∫ v′ψ_i′` over the two adjacent cells.
    fn stiffness_row(&self, x: &DVector<f64>, i: usize) -> HVector {
        let vi = self.node(x, i);
        let left = (&vi - self.node(x, i - 1)) / (self.z[i] - self.z[i - 1]);
        if i + 1 < self.z.len() {
            left + (&vi - self.node(x, i + 1)) / (self.z[i + 1] - self.z[i])
        } else {
            left
        }
    }

    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.phi.len();
        let mut r = DVector::zeros(x.len());
        for k in 0..self.free() {
            let i = k + 1;
            let a = self.op.direct_eval(&self.node(x, i)).ok_or_else(|| {
                Error::param(
                    "operator",
                    "brute-force oracle needs a single-valued selection",
                )
            })?;
            r.rows_mut(k * d, d)
                .copy_from(&(self.stiffness_row(x, i) + a * self.omega[i]));
        }
        Ok(r)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.phi.len();
        let n = self.free();
        let mut jac = DMatrix::zeros(n * d, n * d);
        for k in 0..n {
            let i = k + 1;
            let hl = self.z[i] - self.z[i - 1];
            let mut diag = 1.0 / hl;
            if i + 1 < self.z.len() {
                let hr = self.z[i + 1] - self.z[i];
                diag += 1.0 / hr;
                if k + 1 < n {
                    for r in 0..d {
                        jac[(k * d + r, (k + 1) * d + r)] = -1.0 / hr;
                        jac[((k + 1) * d + r, k * d + r)] = -1.0 / hr;
                    }
                }
            }
            let vi = self.node(x, i);
            for c in 0..d {
                let eps = 1e-7 * (1.0 + vi[c].abs());
                let mut p = vi.clone();
                let mut m = vi.clone();
                p[c] += eps;
                m[c] -= eps;
                let col = (self.op.direct_eval(&p).unwrap() - self.op.direct_eval(&m).unwrap())
                    * (self.omega[i] / (2.0 * eps));
                for r in 0..d {
                    jac[(k * d + r, k * d + c)] += col[r];
                }
                jac[(k * d + c, k * d + c)] += diag;
            }
        }
        Ok(jac)
    }
}

/// `ω_i = ∫ z^q ψ_i`, integrated cell by cell in closed form.
fn lumped_weights(z: &[f64], q: f64) -> Vec<f64> {
    let mut w = vec![0.0; z.len()];
    for i in 0..z.len() - 1 {
        let (a, b) = (z[i], z[i + 1]);
        let h = b - a;
        let m0 = (b.powf(q + 1.0) - a.powf(q + 1.0)) / (q + 1.0);
        let m1 = (b.powf(q + 2.0) - a.powf(q + 2.0)) / (q + 2.0);
        w[i] += (b * m0 - m1) / h;
        w[i + 1] += (m1 - a * m0) / h;
    }
    w
}

/// Solves `0 ∈ K v − b + D A(v)` with `v(0) = φ` on a coarse mesh.
pub fn brute_force_bvp(
    op: &dyn MonotoneOp,
    params: FracParams,
    phi: &HVector,
    mesh: &ZMesh,
) -> Result<BruteForceSolution> {
    let d = op.dim();
    if phi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phi.len(),
        });
    }
    let z = mesh.nodes();
    let far = match mesh.far_bc {
        FarBc::DirichletAtZero => Some(op.zero()),
        FarBc::HomogeneousNeumann => None,
    };
    let sys = System {
        op,
        z,
        omega: lumped_weights(z, params.zexp),
        phi: phi.clone(),
        far,
    };
    let n = sys.free() * d;
    if n > MAX_UNKNOWNS {
        return Err(Error::param(
            "mesh",
            format!("{n} unknowns exceed the oracle budget of {MAX_UNKNOWNS}"),
        ));
    }
    let y = op.zero();
    let mut x = DVector::zeros(n);
    for k in 0..sys.free() {
        let th = 1.0 - z[k + 1] / mesh.z_max();
        x.rows_mut(k * d, d).copy_from(&(&y + (phi - &y) * th));
    }
    let mut r = sys.residual(&x)?;
    let mut rn = r.norm();
    let mut iterations = 0;
    for it in 1..=MAX_NEWTON {
        iterations = it;
        if rn == 0.0 {
            break;
        }
        let step = sys
            .jacobian(&x)?
            .lu()
            .solve(&r)
            .ok_or(Error::Singular("brute-force Jacobian".into()))?;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand = &x - &step * t;
            let rc = sys.residual(&cand)?;
            let rcn = rc.norm();
            if rcn < rn {
                x = cand;
                r = rc;
                rn = rcn;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || t * step.amax() <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }

    let mut values = Vec::with_capacity(z.len());
    let mut residual = 0.0f64;
    for i in 0..z.len() {
        let vi = sys.node(&x, i);
        if i > 0 && (i < z.len() - 1 || sys.far.is_none()) {
            let w = sys.stiffness_row(&x, i) / (-sys.omega[i]);
            residual = residual.max((&vi - resolve(op, 1.0, &(&vi + w))?).norm());
        }
        values.push(vi);
    }
    if !residual.is_finite() || residual > 1e-9 * (1.0 + phi.norm()) {
        return Err(Error::NonConvergence {
            what: "brute-force extension oracle".into(),
            iterations,
            residual,
        });
    }
    Ok(BruteForceSolution {
        v: GridFunction::new(z.to_vec(), values)?,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::mesh::graded_zmesh;
    use crate::monops::{
        make_box, make_plap_grid, make_scalar, GridSpec, LateralBc, LerayLionsField,
    };

    #[test]
    fn zero_data() {
        let op = make_scalar(2, 3.0).unwrap();
        let mesh = graded_zmesh(10, 6.0, 2.0).unwrap();
        let sol = brute_force_bvp(
            &op,
            FracParams::new(0.3).unwrap(),
            &DVector::zeros(2),
            &mesh,
        )
        .unwrap();
        assert!(sol.v.values().iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn linear_scalar_matches_tridiagonal_solve() {
        // s = 1/2: K v + a ω v = b with plain lumped mass
        let a = 2.0;
        let op = make_scalar(1, a).unwrap();
        let mesh = graded_zmesh(9, 5.0, 1.0).unwrap();
        let sol = brute_force_bvp(
            &op,
            FracParams::new(0.5).unwrap(),
            &DVector::from_element(1, 1.0),
            &mesh,
        )
        .unwrap();
        let h = 5.0 / 9.0;
        let n = 8;
        let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0 / h + a * h,
            1 => -1.0 / h,
            _ => 0.0,
        });
        let mut b = DVector::zeros(n);
        b[0] = 1.0 / h;
        let exact = m.lu().solve(&b).unwrap();
        for k in 0..n {
            assert!((sol.v.values()[k + 1][0] - exact[k]).abs() < 1e-13);
        }
        assert!(sol.residual <= 1e-11);
    }

    #[test]
    fn plap_two_node() {
        let op = make_plap_grid(
            LerayLionsField::p_laplace(3.0, LateralBc::Neumann),
            GridSpec::line(2, 1.0),
        )
        .unwrap();
        let mesh = graded_zmesh(10, 8.0, 2.0).unwrap();
        let sol = brute_force_bvp(
            &op,
            FracParams::new(0.5).unwrap(),
            &DVector::from_vec(vec![2.0, 0.0]),
            &mesh,
        )
        .unwrap();
        assert!(sol.residual <= 1e-11, "{}", sol.residual);
    }

    #[test]
    fn needs_single_valued_operator() {
        let op = make_box(1, -1.0, 1.0).unwrap();
        let mesh = graded_zmesh(8, 4.0, 2.0).unwrap();
        assert!(brute_force_bvp(
            &op,
            FracParams::new(0.5).unwrap(),
            &DVector::from_element(1, 0.5),
            &mesh
        )
        .is_err());
    }
}
