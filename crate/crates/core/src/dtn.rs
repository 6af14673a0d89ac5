//! The Dirichlet-to-Neumann operator `Λ_s φ = −(2s)^{1−2s} v′(0)` of the
//! extension problem, and its resolvent through the Robin problem.
//!
//! [`DtnOperator`] is itself a [`MonotoneOp`] whose resolvent is the Robin
//! solve, so the fractional power can be fed back into anything that
//! consumes operators through their resolvents.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::{solve_from, Boundary, ExtensionProblem, ExtensionSolution, SolverConfig};
use crate::hilbert::{inner, HVector};
use crate::mesh::{FracParams, ZMesh};
use crate::monops::{MonotoneOp, SharedOp};

/// Trace fits worse than this (relative) flag `φ` as probably outside `D(A)`.
pub const TRACE_FIT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TraceDiagnostics {
    pub fit_residual: f64,
    pub nodes_used: usize,
    /// `A⁰φ` unavailable, or the near-origin profile is not affine.
    pub likely_outside_domain: bool,
}

#[derive(Debug, Clone)]
pub struct DtNResult {
    pub lambda_s_phi: HVector,
    pub trace_diagnostics: TraceDiagnostics,
    pub solution: ExtensionSolution,
}

/// `Λ_s` for a fixed operator, exponent, mesh and solver configuration.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    pub op: SharedOp,
    pub params: FracParams,
    pub mesh: ZMesh,
    pub cfg: SolverConfig,
}

impl DtnOperator {
    pub fn new(op: SharedOp, params: FracParams, mesh: ZMesh, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            op,
            params,
            mesh,
            cfg,
        })
    }

    pub fn problem(&self, boundary: Boundary) -> Result<ExtensionProblem> {
        ExtensionProblem::new(
            self.op.clone(),
            self.params,
            self.mesh.clone(),
            boundary,
            self.cfg.clone(),
        )
    }

    pub fn apply(&self, phi: &HVector) -> Result<DtNResult> {
        self.apply_from(phi, None)
    }

    /// As [`apply`](Self::apply), warm-started from node values of a previous extension.
    pub fn apply_from(&self, phi: &HVector, guess: Option<&[HVector]>) -> Result<DtNResult> {
        let problem = self.problem(Boundary::Dirichlet(phi.clone()))?;
        let solution = converged(solve_from(&problem, guess)?, "Dirichlet extension")?;
        let lambda_s_phi = &solution.trace_dv0 * (-self.params.trace_const);
        let fit = &solution.trace_fit;
        let trace_diagnostics = TraceDiagnostics {
            fit_residual: fit.residual,
            nodes_used: fit.nodes_used,
            likely_outside_domain: solution.phi_outside_domain
                || fit.residual > TRACE_FIT_THRESHOLD,
        };
        Ok(DtNResult {
            lambda_s_phi,
            trace_diagnostics,
            solution,
        })
    }

    /// `J_λ^{Λ_s} φ`: the trace `v(0)` of the Robin problem `−c v′(0) + v(0)/λ = φ/λ`.
    pub fn resolve(&self, lambda: f64, phi: &HVector) -> Result<HVector> {
        Ok(self.resolve_from(lambda, phi, None)?.trace_v0)
    }

    /// Full Robin extension behind [`resolve`](Self::resolve).
    pub fn resolve_from(
        &self,
        lambda: f64,
        phi: &HVector,
        guess: Option<&[HVector]>,
    ) -> Result<ExtensionSolution> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param(
                "lambda",
                format!("must be positive, got {lambda}"),
            ));
        }
        let boundary = Boundary::Robin {
            lambda: 1.0 / lambda,
            phi: phi / lambda,
        };
        let problem = self.problem(boundary)?;
        converged(solve_from(&problem, guess)?, "Robin extension")
    }

    /// The square `lim_{λ→0} (Λ_sφ − (Λ_s)_λ φ)/λ` in the sense of Yosida
    /// differences, with `(Λ_s)_λ φ = (φ − J_λφ)/λ`. Evaluated at `λ` and
    /// `λ/2` and extrapolated. For linear `A` this is `Λ_s(Λ_sφ)`.
    pub fn square(&self, phi: &HVector, lambda: f64) -> Result<HVector> {
        let l = self.apply(phi)?.lambda_s_phi;
        let quotient = |lam: f64| -> Result<HVector> {
            let yos = (phi - self.resolve(lam, phi)?) / lam;
            Ok((&l - yos) / lam)
        };
        Ok(quotient(0.5 * lambda)? * 2.0 - quotient(lambda)?)
    }

    /// `‖u + λΛ_s u − φ‖`, re-solving the Dirichlet problem at `u`.
    pub fn resolvent_identity_residual(
        &self,
        lambda: f64,
        phi: &HVector,
        u: &HVector,
    ) -> Result<f64> {
        let lu = self.apply(u)?.lambda_s_phi;
        Ok((u + lu * lambda - phi).norm())
    }
}

fn converged(sol: ExtensionSolution, what: &str) -> Result<ExtensionSolution> {
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence {
            what: what.to_string(),
            iterations: sol.iterations,
            residual: sol.inclusion_residual,
        })
    }
}

impl MonotoneOp for DtnOperator {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn label(&self) -> String {
        format!("({})^{}", self.op.label(), self.params.s)
    }

    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector> {
        self.resolve(mu, w)
    }

    fn zero(&self) -> HVector {
        self.op.zero()
    }
}

pub fn apply_lambda_s(
    op: SharedOp,
    params: FracParams,
    phi: &HVector,
    mesh: &ZMesh,
    cfg: &SolverConfig,
) -> Result<DtNResult> {
    DtnOperator::new(op, params, mesh.clone(), cfg.clone())?.apply(phi)
}

pub fn resolve_lambda_s(
    op: SharedOp,
    params: FracParams,
    lambda: f64,
    phi: &HVector,
    mesh: &ZMesh,
    cfg: &SolverConfig,
) -> Result<HVector> {
    DtnOperator::new(op, params, mesh.clone(), cfg.clone())?.resolve(lambda, phi)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// `⟨Λ_sφ − Λ_sψ, φ − ψ⟩` per pair.
    pub values: Vec<f64>,
    pub min: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Samples the monotonicity of `Λ_s` on the given pairs, in parallel.
pub fn monotonicity_probe(
    dtn: &DtnOperator,
    pairs: &[(HVector, HVector)],
) -> Result<MonotonicityReport> {
    let results: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(a, b)| {
            let ra = dtn.apply(a)?;
            let rb = dtn.apply(b)?;
            let val = inner(&(&ra.lambda_s_phi - &rb.lambda_s_phi), &(a - b))?;
            Ok((val, ra.solution.eps_disc.max(rb.solution.eps_disc)))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let tolerance = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let min = if values.is_empty() { 0.0 } else { min };
    Ok(MonotonicityReport {
        pass: min >= -tolerance,
        values,
        min,
        tolerance,
    })
}
