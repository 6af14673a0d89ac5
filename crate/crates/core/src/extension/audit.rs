//! A-priori estimates of the extension problem checked on discrete solutions.
//!
//! The `t`-variable quantities are evaluated through their exact `z`-variable
//! forms: with `c = (2s)^{1−2s}` and `g(t) = t^{1−2s}u′(t) = c·v′(z)`,
//!
//! ```text
//! t u′(t)            = 2s · z v′(z)           dt/t = dz/(2s z)
//! t^{1+2s} g′(t)     = (2s)² · z^{2+q} w(z)    (v″ = z^q w)
//! t^s g(t)           = (2s)^{s}   c · z^{1/2} v′(z)
//! t^s g′(t)          = (2s)^{s}   c · z^{(1−s)/(2s)} w(z)
//! ```

use serde::Serialize;

use super::assemble::Discretization;
use super::{Boundary, ExtensionProblem, ExtensionSolution};
use crate::error::{Error, Result};
use crate::hilbert::{weighted_l2_star_norm, GridFunction, HVector};
use crate::mesh::{FracParams, ZMesh};
use crate::monops::{minimal_selection, SharedOp};

#[derive(Debug, Clone, Serialize)]
pub struct EstimateCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs·(1 + ε_disc) + floor − lhs`, the floor being `10·tol·(1 + ‖φ − y‖)`.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub checks: Vec<EstimateCheck>,
    pub eps_disc: f64,
    /// False when `A⁰φ` could not be formed; the domain-dependent bounds are then skipped.
    pub phi_in_domain: bool,
}

impl EstimateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&EstimateCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative check `lhs ≤ rhs·(1 + ε)`, with an absolute `floor` for bounds that vanish.
fn check_rel(name: &str, lhs: f64, rhs: f64, eps: f64, floor: f64) -> EstimateCheck {
    let slack = rhs * (1.0 + eps) + floor - lhs;
    EstimateCheck {
        name: name.to_string(),
        lhs,
        rhs,
        slack,
        pass: slack >= 0.0,
    }
}

/// Checks that hold up to `ε_disc` in absolute terms (monotonicity, convexity).
fn check_abs(name: &str, violation: f64, eps: f64) -> EstimateCheck {
    EstimateCheck {
        name: name.to_string(),
        lhs: violation,
        rhs: eps,
        slack: eps - violation,
        pass: violation <= eps,
    }
}

/// Branch coefficient of the weighted second-derivative bound in `t`.
pub fn t_flux_derivative_coefficient(s: f64) -> f64 {
    if s >= 0.5 || (s - 0.5).abs() < 1e-3 {
        s.sqrt()
    } else {
        s.sqrt() * (s / (1.0 - 2.0 * s) * 0.5 + 3.0).sqrt() / 2f64.sqrt()
    }
}

/// Branch coefficient of the weighted second-derivative bound in `z`.
pub fn z_second_derivative_coefficient(s: f64) -> f64 {
    if s >= 0.5 || (s - 0.5).abs() < 1e-3 {
        1.0 / 2f64.sqrt()
    } else {
        0.5 * (s / (1.0 - 2.0 * s) * 0.5 + 3.0).sqrt()
    }
}

fn norms(f: &[HVector]) -> Vec<f64> {
    f.iter().map(|v| v.norm()).collect()
}

fn max_increase(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Largest drop between consecutive divided-difference slopes of `f` on `x`,
/// relative to the largest slope magnitude.
fn convexity_violation(x: &[f64], f: &[f64]) -> f64 {
    let slopes: Vec<f64> = x
        .windows(2)
        .zip(f.windows(2))
        .map(|(x, f)| (f[1] - f[0]) / (x[1] - x[0]))
        .collect();
    let scale = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    slopes
        .windows(2)
        .map(|w| (w[0] - w[1]) / scale)
        .fold(0.0, f64::max)
}

/// Checks every estimate the theory provides on a converged solution.
///
/// For a Robin solution the bounds are those of the Dirichlet problem with
/// datum `v(0)`, which the Robin solution also solves.
pub fn audit_estimates(
    sol: &ExtensionSolution,
    problem: &ExtensionProblem,
) -> Result<EstimateReport> {
    let p = &problem.params;
    let s = p.s;
    let eps = sol.eps_disc;
    let y = problem.op.zero();
    let phi = &sol.trace_v0;
    let dist0 = (phi - &y).norm();
    let floor = 10.0 * problem.cfg.tol * (1.0 + dist0);
    let check = |name: &str, lhs: f64, rhs: f64, eps: f64| check_rel(name, lhs, rhs, eps, floor);
    let z = sol.v.nodes();
    let shifted: Vec<HVector> = sol.v.values().iter().map(|v| v - &y).collect();
    let dv = &sol.v_prime;
    let mut checks = Vec::new();

    let dist = norms(&shifted);
    checks.push(check_abs(
        "distance_to_zero_nonincreasing",
        max_increase(&dist),
        eps * dist0,
    ));

    let zdv = weighted_l2_star_norm(dv, 1.0)?;
    checks.push(check(
        "t_derivative_l2",
        (2.0 * s).sqrt() * zdv,
        s.sqrt() * dist0,
        eps,
    ));
    checks.push(check("z_derivative_l2", zdv, dist0 / 2f64.sqrt(), eps));

    let pointwise = z
        .iter()
        .zip(dv.values())
        .map(|(z, d)| z * d.norm())
        .fold(0.0, f64::max);
    checks.push(check(
        "t_derivative_pointwise",
        2.0 * s * pointwise,
        2.0 * s * dist0,
        eps,
    ));
    checks.push(check("z_derivative_pointwise", pointwise, dist0, eps));

    let dvn = norms(dv.values());
    let dv_scale = dvn.iter().fold(0.0f64, |m, x| m.max(*x));
    checks.push(check_abs(
        "z_derivative_nonincreasing",
        max_increase(&dvn),
        eps * dv_scale,
    ));

    let w = GridFunction::new(z.to_vec(), sol.selection.clone())?;
    let z2v2 = weighted_l2_star_norm(&w, 1.0 / s)?;
    checks.push(check(
        "t_flux_derivative_l2",
        (2.0 * s).powf(1.5) * z2v2,
        t_flux_derivative_coefficient(s) * dist0,
        eps,
    ));
    checks.push(check(
        "z_second_derivative_l2",
        z2v2,
        z_second_derivative_coefficient(s) * dist0,
        eps,
    ));

    let a0 = match minimal_selection(problem.op.as_ref(), phi) {
        Ok(a) => Some(a.norm()),
        Err(Error::NotInDomain(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(a0) = a0 {
        let c = p.trace_const;
        let factor = (2.0 * s).powf(0.5 - s);
        let growth = (2.0 * s).powf(1.0 - s);
        checks.push(check(
            "neumann_trace",
            c * sol.trace_dv0.norm(),
            c * (a0.sqrt() + dist0.sqrt()).powi(2),
            eps,
        ));
        checks.push(check(
            "flux_weighted_l2",
            factor * weighted_l2_star_norm(dv, 0.5)?,
            growth * (a0.sqrt() + dist0),
            eps,
        ));
        checks.push(check(
            "flux_derivative_weighted_l2",
            factor * weighted_l2_star_norm(&w, p.underline_s)?,
            growth * (a0 + dist0.sqrt() * a0.sqrt()),
            eps,
        ));
    }

    let sq: Vec<f64> = dist.iter().map(|d| d * d).collect();
    checks.push(check_abs(
        "norm_square_decreasing",
        max_increase(&sq),
        eps * dist0 * dist0,
    ));
    checks.push(check_abs(
        "norm_square_convex_z",
        convexity_violation(z, &sq),
        eps,
    ));
    if s <= 0.5 {
        let t = problem.mesh.t_nodes(p);
        checks.push(check_abs(
            "norm_square_convex_t",
            convexity_violation(&t, &sq),
            eps,
        ));
    }

    Ok(EstimateReport {
        checks,
        eps_disc: eps,
        phi_in_domain: a0.is_some(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    /// `max_i (‖v_{i+1} − v̂_{i+1}‖ − ‖v_i − v̂_i‖)⁺`.
    pub max_increase: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Non-increase of `‖v(z) − v̂(z)‖` along the shared mesh.
pub fn contraction_check(
    a: &ExtensionSolution,
    b: &ExtensionSolution,
) -> Result<ContractionReport> {
    a.v.check_same_grid(&b.v)?;
    let d: Vec<f64> =
        a.v.values()
            .iter()
            .zip(b.v.values())
            .map(|(x, y)| (x - y).norm())
            .collect();
    let inc = max_increase(&d);
    let tolerance = 1e-8 + a.eps_disc.max(b.eps_disc);
    Ok(ContractionReport {
        max_increase: inc,
        tolerance,
        pass: inc <= tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyPair {
    pub lambda: f64,
    pub lambda_hat: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub delta: f64,
    pub pairs: Vec<CauchyPair>,
}

impl CauchyReport {
    pub fn all_pass(&self) -> bool {
        self.pairs.iter().all(|p| p.pass)
    }
}

/// Compares `δ‖v_λ − v_λ̂‖²` in the `z^q`-weighted norm with the Cauchy bound
/// `((λ+λ̂)/4)·[(‖A⁰φ‖ + δ‖φ‖) + ‖φ‖^{1/2}(‖A⁰φ‖ + δ‖φ‖)^{1/2}]²`
/// (norms of `φ` taken relative to the zero `y`).
pub fn cauchy_bound_check(
    op: SharedOp,
    params: FracParams,
    mesh: ZMesh,
    phi: &HVector,
    delta: f64,
    lambda_pairs: &[(f64, f64)],
) -> Result<CauchyReport> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    let problem = ExtensionProblem::new(
        op,
        params,
        mesh,
        Boundary::Dirichlet(phi.clone()),
        Default::default(),
    )?;
    let disc = Discretization::new(&problem)?;
    let a0 = minimal_selection(problem.op.as_ref(), phi)?.norm();
    let phin = (phi - problem.op.zero()).norm();
    let m = a0 + delta * phin;
    let bracket = (m + phin.sqrt() * m.sqrt()).powi(2);
    let mut pairs = Vec::new();
    for &(l, lh) in lambda_pairs {
        let va = super::path::stage_solution(&problem, &disc, l, delta)?;
        let vb = super::path::stage_solution(&problem, &disc, lh, delta)?;
        let mut sq = 0.0;
        for (k, om) in disc.omega.iter().enumerate() {
            sq += om * (va.column(k) - vb.column(k)).norm_squared();
        }
        let lhs = delta * sq;
        let rhs = (l + lh) / 4.0 * bracket;
        pairs.push(CauchyPair {
            lambda: l,
            lambda_hat: lh,
            lhs,
            rhs,
            pass: lhs <= rhs,
        });
    }
    Ok(CauchyReport { delta, pairs })
}
