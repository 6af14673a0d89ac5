use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{MonotoneOp, INNER_TOL};
use crate::error::{Error, Result};
use crate::hilbert::HVector;

/// `A = M` for a symmetric positive-semidefinite matrix, resolvent by spectral factorization.
#[derive(Debug, Clone)]
pub struct LinearSpd {
    matrix: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

pub fn make_linear_spd(matrix: DMatrix<f64>) -> Result<LinearSpd> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::param("matrix", "must be square and nonempty"));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix".into()));
    }
    let scale = matrix.amax().max(1.0);
    let asym = (&matrix - matrix.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::param(
            "matrix",
            format!("asymmetry {asym:.3e} exceeds 1e-12"),
        ));
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::param(
            "matrix",
            format!("negative eigenvalue {min:.3e}"),
        ));
    }
    let eigvals = eig.eigenvalues.map(|l| l.max(0.0));
    Ok(LinearSpd {
        matrix,
        eigvals,
        eigvecs: eig.eigenvectors,
    })
}

impl LinearSpd {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// `V f(Λ) Vᵀ w`.
    pub fn spectral_apply(&self, w: &HVector, f: impl Fn(f64) -> f64) -> HVector {
        let mut c = self.eigvecs.tr_mul(w);
        for (ci, &l) in c.iter_mut().zip(self.eigvals.iter()) {
            *ci *= f(l);
        }
        &self.eigvecs * c
    }
}

impl MonotoneOp for LinearSpd {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn label(&self) -> String {
        format!("linear_spd({}x{})", self.dim(), self.dim())
    }

    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector> {
        Ok(self.spectral_apply(w, |l| 1.0 / (1.0 + mu * l)))
    }

    fn direct_eval(&self, u: &HVector) -> Option<HVector> {
        Some(&self.matrix * u)
    }

    fn zero(&self) -> HVector {
        DVector::zeros(self.dim())
    }

    fn domain_projection(&self, u: &HVector) -> Option<HVector> {
        Some(u.clone())
    }

    fn is_single_valued(&self) -> bool {
        true
    }
}

/// `A = a·I` on `ℝⁿ`.
#[derive(Debug, Clone)]
pub struct ScalarOp {
    dim: usize,
    a: f64,
}

pub fn make_scalar(dim: usize, a: f64) -> Result<ScalarOp> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::param(
            "a",
            format!("must be finite and nonnegative, got {a}"),
        ));
    }
    Ok(ScalarOp { dim, a })
}

impl ScalarOp {
    pub fn coefficient(&self) -> f64 {
        self.a
    }
}

impl MonotoneOp for ScalarOp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        format!("scalar(a={})", self.a)
    }
    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector> {
        Ok(w / (1.0 + mu * self.a))
    }
    fn direct_eval(&self, u: &HVector) -> Option<HVector> {
        Some(u * self.a)
    }
    fn zero(&self) -> HVector {
        DVector::zeros(self.dim)
    }
    fn domain_projection(&self, u: &HVector) -> Option<HVector> {
        Some(u.clone())
    }
    fn is_single_valued(&self) -> bool {
        true
    }
}

/// Subdifferential of the indicator of the box `[lo, hi]ⁿ`.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    dim: usize,
    lo: f64,
    hi: f64,
}

pub fn make_box(dim: usize, lo: f64, hi: f64) -> Result<BoxIndicator> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if !(lo <= hi) {
        return Err(Error::param(
            "lo",
            format!("box is empty: lo={lo}, hi={hi}"),
        ));
    }
    Ok(BoxIndicator { dim, lo, hi })
}

impl BoxIndicator {
    fn clamp(&self, w: &HVector) -> HVector {
        w.map(|x| x.clamp(self.lo, self.hi))
    }
}

impl MonotoneOp for BoxIndicator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        format!("box([{}, {}]^{})", self.lo, self.hi, self.dim)
    }
    fn resolvent(&self, _mu: f64, w: &HVector) -> Result<HVector> {
        Ok(self.clamp(w))
    }
    fn zero(&self) -> HVector {
        self.clamp(&DVector::zeros(self.dim))
    }
    fn domain_projection(&self, u: &HVector) -> Option<HVector> {
        Some(self.clamp(u))
    }
}

/// Componentwise `∂(c/q·|x|^q)`, `q ≥ 1`; `q = 1` gives soft thresholding.
#[derive(Debug, Clone)]
pub struct PowerProx {
    dim: usize,
    c: f64,
    q: f64,
}

pub fn make_power_prox(dim: usize, c: f64, q: f64) -> Result<PowerProx> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", format!("must be at least 1, got {q}")));
    }
    Ok(PowerProx { dim, c, q })
}

impl PowerProx {
    /// Nonnegative root of `r + μc·r^{q−1} = m`.
    fn radial(&self, mu: f64, m: f64) -> Result<f64> {
        let k = mu * self.c;
        let q = self.q;
        if q == 1.0 {
            return Ok((m - k).max(0.0));
        }
        if q == 2.0 {
            return Ok(m / (1.0 + k));
        }
        if m == 0.0 {
            return Ok(0.0);
        }
        let g = |r: f64| r + k * r.powf(q - 1.0) - m;
        let (mut lo, mut hi) = (0.0, m);
        let mut r = m / (1.0 + k);
        for it in 0..200 {
            let val = g(r);
            if val.abs() <= INNER_TOL * (1.0 + m) {
                return Ok(r);
            }
            if val > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let dg = 1.0 + k * (q - 1.0) * r.powf(q - 2.0);
            let mut next = r - val / dg;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if hi - lo <= f64::EPSILON * m {
                return Ok(next);
            }
            r = next;
            if it == 199 {
                break;
            }
        }
        Err(Error::NonConvergence {
            what: "power prox radial equation".into(),
            iterations: 200,
            residual: g(r).abs(),
        })
    }
}

impl MonotoneOp for PowerProx {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        format!("power_prox(c={}, q={})", self.c, self.q)
    }
    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector> {
        let mut out = w.clone();
        for x in out.iter_mut() {
            let r = self.radial(mu, x.abs())?;
            *x = r.copysign(*x);
        }
        Ok(out)
    }
    fn direct_eval(&self, u: &HVector) -> Option<HVector> {
        let (c, q) = (self.c, self.q);
        Some(u.map(|x| {
            if x == 0.0 {
                0.0
            } else {
                c * x.abs().powf(q - 1.0) * x.signum()
            }
        }))
    }
    fn zero(&self) -> HVector {
        DVector::zeros(self.dim)
    }
    fn domain_projection(&self, u: &HVector) -> Option<HVector> {
        Some(u.clone())
    }
    fn is_single_valued(&self) -> bool {
        self.q > 1.0
    }
}
