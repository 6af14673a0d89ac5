//! Maximal monotone operators exposed through their resolvents.
//!
//! An operator is known to the rest of the crate only through
//! [`MonotoneOp`]: its resolvent `J_μ = (I + μA)⁻¹`, optionally a
//! single-valued selection on `D(A)`, a point of `A⁻¹({0})`, and
//! optionally the projection onto the closure of its domain. The free
//! functions [`resolve`], [`yosida`] and [`minimal_selection`] are the
//! validated entry points.

mod basic;
mod grid;

use std::fmt::Debug;
use std::sync::Arc;

pub use basic::{
    make_box, make_linear_spd, make_power_prox, make_scalar, BoxIndicator, LinearSpd, PowerProx,
    ScalarOp,
};
pub use grid::{make_plap_grid, FluxKind, GridOperator, GridSpec, LateralBc, LerayLionsField};

use crate::error::{Error, Result};
use crate::hilbert::{check_finite, dist, HVector};

/// Tolerance factor for inner nonlinear resolvent solves: `‖u + μA⁰u − w‖ ≤ tol·(1 + ‖w‖)`.
pub const INNER_TOL: f64 = 1e-11;

pub trait MonotoneOp: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    /// Solves `u + μAu ∋ w`. Called through [`resolve`], which validates inputs.
    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector>;

    /// A single-valued selection of `A` on `D(A)`; the minimal selection
    /// when the operator is multivalued.
    fn direct_eval(&self, _u: &HVector) -> Option<HVector> {
        None
    }

    /// An element `y` with `0 ∈ Ay`.
    fn zero(&self) -> HVector;

    /// Nearest point of the closure of `D(A)`, when that is computable.
    fn domain_projection(&self, _u: &HVector) -> Option<HVector> {
        None
    }

    /// True when `Au` is a singleton wherever it is nonempty.
    fn is_single_valued(&self) -> bool {
        false
    }
}

pub type SharedOp = Arc<dyn MonotoneOp>;

fn check_input(op: &dyn MonotoneOp, v: &HVector) -> Result<()> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: v.len(),
        });
    }
    check_finite(v, "operator input")
}

/// `J_μ w`, the unique `u` with `u + μAu ∋ w`.
pub fn resolve(op: &dyn MonotoneOp, mu: f64, w: &HVector) -> Result<HVector> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::param(
            "mu",
            format!("resolvent step must be positive, got {mu}"),
        ));
    }
    check_input(op, w)?;
    let u = op.resolvent(mu, w)?;
    check_finite(&u, "resolvent output")?;
    Ok(u)
}

/// Yosida approximation `A_λ u = (u − J_λ u)/λ`.
pub fn yosida(op: &dyn MonotoneOp, lambda: f64, u: &HVector) -> Result<HVector> {
    let j = resolve(op, lambda, u)?;
    Ok((u - j) / lambda)
}

/// Yosida approximation evaluated as `A(J_λ u)` for single-valued operators,
/// which avoids the `1/λ` cancellation of the difference quotient.
pub(crate) fn yosida_stable(op: &dyn MonotoneOp, lambda: f64, u: &HVector) -> Result<HVector> {
    let j = resolve(op, lambda, u)?;
    if op.is_single_valued() {
        if let Some(a) = op.direct_eval(&j) {
            return Ok(a);
        }
    }
    Ok((u - j) / lambda)
}

const SELECTION_LAMBDAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Least-norm element of `Au`.
///
/// Uses the operator's own selection when available, otherwise the
/// Yosida limit `λ → 0` by two-level Richardson extrapolation over
/// `λ ∈ {1e-2, 5e-3, 2.5e-3}`.
pub fn minimal_selection(op: &dyn MonotoneOp, u: &HVector) -> Result<HVector> {
    check_input(op, u)?;
    if let Some(a) = op.direct_eval(u) {
        return Ok(a);
    }
    if let Some(p) = op.domain_projection(u) {
        let gap = dist(&p, u)?;
        if gap > 1e-10 * (1.0 + u.norm()) {
            return Err(Error::NotInDomain(format!(
                "distance {gap:.3e} to the closure of D(A)"
            )));
        }
    }
    let seq: Vec<HVector> = SELECTION_LAMBDAS
        .iter()
        .map(|&l| yosida(op, l, u))
        .collect::<Result<_>>()?;
    for pair in seq.windows(2) {
        let (a, b) = (pair[0].norm(), pair[1].norm());
        if b > 10.0 * a && b > 1e-12 {
            return Err(Error::NotInDomain(format!(
                "Yosida sequence diverges (norm {a:.3e} -> {b:.3e})"
            )));
        }
    }
    Ok((&seq[2] * 8.0 - &seq[1] * 6.0 + &seq[0]) / 3.0)
}
