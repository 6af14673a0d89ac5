//! The transformed extension problem `v″ ∈ z^{(1−2s)/s} A v` on a truncated
//! half-line, with a Dirichlet or Robin row at `z = 0`.
//!
//! Discretization is P1 finite elements with lumped singular mass
//! `ω_i = ∫ z^q φ_i dz`. With `K` the stiffness matrix and `D = diag(ω)`,
//! the discrete problem is the monotone inclusion
//!
//! ```text
//! 0 ∈ K v − b + D·A(v)      (node-wise A)
//! ```
//!
//! over the free nodes, solved either by Douglas–Rachford splitting in the
//! `D`-weighted metric or by the Yosida/shift regularization path.

mod assemble;
mod audit;
mod newton;
mod path;
mod splitting;

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

pub use audit::{
    audit_estimates, cauchy_bound_check, contraction_check, t_flux_derivative_coefficient,
    z_second_derivative_coefficient, CauchyReport, ContractionReport, EstimateCheck,
    EstimateReport,
};

use crate::error::{Error, Result};
use crate::hilbert::{check_finite, GridFunction, HVector};
use crate::mesh::{FracParams, ZMesh};
use crate::monops::{minimal_selection, resolve, SharedOp};
use assemble::Discretization;

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// `v(0) = φ`.
    Dirichlet(HVector),
    /// `−(2s)^{1−2s} v′(0) + λ v(0) = φ`.
    Robin { lambda: f64, phi: HVector },
}

impl Boundary {
    pub fn data(&self) -> &HVector {
        match self {
            Boundary::Dirichlet(phi) | Boundary::Robin { phi, .. } => phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Splitting,
    RegularizedPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationSchedule {
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub warm_start: bool,
}

impl Default for RegularizationSchedule {
    /// `λ_k = δ_k = 2^{−k}`, `k = 0..=20`.
    fn default() -> Self {
        let seq: Vec<f64> = (0..=20).map(|k| 0.5f64.powi(k)).collect();
        Self {
            lambdas: seq.clone(),
            deltas: seq,
            warm_start: true,
        }
    }
}

impl RegularizationSchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, seq) in [("lambdas", &self.lambdas), ("deltas", &self.deltas)] {
            if seq.len() < 2 {
                return Err(Error::param(name, "needs at least two entries"));
            }
            if seq.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::param(name, "entries must be positive"));
            }
            if seq.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::param(name, "must be strictly decreasing"));
            }
            if seq[seq.len() - 1] > 1e-6 * seq[0] {
                return Err(Error::param(
                    name,
                    "last entry must be at most 1e-6 times the first",
                ));
            }
        }
        if self.lambdas.len() != self.deltas.len() {
            return Err(Error::param(
                "deltas",
                "must have the same length as lambdas",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub mu: f64,
    pub relaxation: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Anderson memory for the splitting iteration; `0` disables acceleration.
    pub anderson: usize,
    pub schedule: RegularizationSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Splitting,
            mu: 1.0,
            relaxation: 1.0,
            max_iters: 50_000,
            tol: 1e-10,
            anderson: 8,
            schedule: RegularizationSchedule::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::param("mu", "must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::param("relaxation", "must lie in (0, 2)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        if self.method == Method::RegularizedPath {
            self.schedule.validate()?;
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionProblem {
    pub op: SharedOp,
    pub params: FracParams,
    pub mesh: ZMesh,
    pub boundary: Boundary,
    pub cfg: SolverConfig,
}

impl ExtensionProblem {
    pub fn new(
        op: SharedOp,
        params: FracParams,
        mesh: ZMesh,
        boundary: Boundary,
        cfg: SolverConfig,
    ) -> Result<Self> {
        let phi = boundary.data();
        if phi.len() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: phi.len(),
            });
        }
        check_finite(phi, "boundary data")?;
        if let Boundary::Robin { lambda, .. } = &boundary {
            if !(*lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::param(
                    "lambda",
                    format!("Robin coefficient must be positive, got {lambda}"),
                ));
            }
        }
        cfg.validate()?;
        Ok(Self {
            op,
            params,
            mesh,
            boundary,
            cfg,
        })
    }

    pub fn phi(&self) -> &HVector {
        self.boundary.data()
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionSolution {
    pub v: GridFunction,
    pub v_prime: GridFunction,
    /// Selection `w_i ∈ A v_i` implied by the discrete equations.
    pub selection: Vec<HVector>,
    pub trace_v0: HVector,
    /// `v′(0)` from the discrete flux at the first cell.
    pub trace_dv0: HVector,
    pub inclusion_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub trace_fit: TraceFit,
    /// Set when `A⁰φ` was unavailable and the trace used the neighbouring selection.
    pub phi_outside_domain: bool,
    /// `10·tol + 2·h₀/Z`, the slack granted to discrete estimate checks.
    pub eps_disc: f64,
}

/// Least-squares line through the first four positive nodes, kept as a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFit {
    pub slope: HVector,
    /// RMS misfit of the line relative to `1 + ‖v(0)‖`.
    pub residual: f64,
    pub nodes_used: usize,
}

/// Solves the extension problem with the configured method.
pub fn solve(problem: &ExtensionProblem) -> Result<ExtensionSolution> {
    solve_from(problem, None)
}

/// As [`solve`], starting from `guess` (node values of `v`) when given.
pub fn solve_from(
    problem: &ExtensionProblem,
    guess: Option<&[HVector]>,
) -> Result<ExtensionSolution> {
    let disc = Discretization::new(problem)?;
    if let Some(g) = guess {
        if g.len() != problem.mesh.nodes().len() {
            return Err(Error::MeshMismatch(
                "initial guess does not match the mesh".into(),
            ));
        }
    }
    let raw = match problem.cfg.method {
        Method::Splitting => splitting::run(problem, &disc, guess)?,
        Method::RegularizedPath => path::run(problem, &disc, guess)?,
    };
    finish(problem, &disc, raw)
}

/// Free-node iterate and its selection, as produced by a solver backend.
pub(crate) struct RawSolution {
    /// `d × n_free`, one column per free node.
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual tolerance the backend certifies (relative to `1 + ‖φ‖`).
    pub certified_tol: f64,
}

fn finish(
    problem: &ExtensionProblem,
    disc: &Discretization,
    raw: RawSolution,
) -> Result<ExtensionSolution> {
    let op = problem.op.as_ref();
    let n_nodes = problem.mesh.nodes().len();
    let phi = problem.phi();
    let mu = problem.cfg.mu;

    // inclusion residual on the free nodes
    let mut incl = 0.0f64;
    for k in 0..disc.n_free() {
        let vk: HVector = raw.v.column(k).into_owned();
        let wk: HVector = raw.w.column(k).into_owned();
        let j = resolve(op, mu, &(&vk + &wk * mu))?;
        incl = incl.max((vk - j).norm());
    }

    let mut v: Vec<HVector> = Vec::with_capacity(n_nodes);
    let mut w: Vec<HVector> = Vec::with_capacity(n_nodes);
    let mut outside = false;
    for i in 0..n_nodes {
        if let Some(k) = disc.free_index(i) {
            v.push(raw.v.column(k).into_owned());
            w.push(raw.w.column(k).into_owned());
        } else if i == 0 {
            v.push(phi.clone());
            w.push(DVector::zeros(phi.len()));
        } else {
            v.push(disc.y.clone());
            w.push(DVector::zeros(phi.len()));
        }
    }
    if disc.dirichlet_start {
        match minimal_selection(op, phi) {
            Ok(a) => w[0] = a,
            Err(Error::NotInDomain(_)) => {
                outside = true;
                w[0] = w[1].clone();
            }
            Err(e) => return Err(e),
        }
    }
    if disc.dirichlet_end {
        // the far node carries the known zero, where 0 ∈ A y
        w[n_nodes - 1] = DVector::zeros(phi.len());
    }

    let z = problem.mesh.nodes();
    let h = problem.mesh.widths();
    let moments = &disc.moments;
    let mut dv: Vec<HVector> = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes - 1 {
        dv.push((&v[i + 1] - &v[i]) / h[i] - &w[i] * moments[i].0);
    }
    let last = n_nodes - 1;
    dv.push((&v[last] - &v[last - 1]) / h[last - 1] + &w[last] * moments[last - 1].1);

    let trace_fit = fit_trace(z, &v);
    let converged = raw.converged && incl <= raw.certified_tol * (1.0 + phi.norm());
    Ok(ExtensionSolution {
        trace_v0: v[0].clone(),
        trace_dv0: dv[0].clone(),
        v: GridFunction::new(z.to_vec(), v)?,
        v_prime: GridFunction::new(z.to_vec(), dv)?,
        selection: w,
        inclusion_residual: incl,
        iterations: raw.iterations,
        converged,
        method: problem.cfg.method,
        trace_fit,
        phi_outside_domain: outside,
        eps_disc: 10.0 * problem.cfg.tol + 2.0 * h[0] / problem.mesh.z_max(),
    })
}

fn fit_trace(z: &[f64], v: &[HVector]) -> TraceFit {
    let m = 4.min(z.len() - 1);
    let xs = &z[1..=m];
    let xm = xs.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let mut ym = DVector::zeros(v[0].len());
    for vi in &v[1..=m] {
        ym += vi;
    }
    ym /= m as f64;
    let mut slope = DVector::zeros(v[0].len());
    for (x, vi) in xs.iter().zip(&v[1..=m]) {
        slope += (vi - &ym) * ((x - xm) / sxx);
    }
    let mut ss = 0.0;
    for (x, vi) in xs.iter().zip(&v[1..=m]) {
        let pred = &ym + &slope * (x - xm);
        ss += (vi - pred).norm_squared();
    }
    TraceFit {
        slope,
        residual: (ss / m as f64).sqrt() / (1.0 + v[0].norm()),
        nodes_used: m,
    }
}

/// Writes the solution as CSV: `z, t, v_0, …` with a commented header of run metadata.
pub fn write_solution_csv(
    sol: &ExtensionSolution,
    problem: &ExtensionProblem,
    path: &Path,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let mesh = &problem.mesh;
    writeln!(
        file,
        "# s={} N={} Z={} gamma={} method={:?} residual={:.6e}",
        problem.params.s,
        mesh.cells(),
        mesh.z_max(),
        mesh.grading(),
        sol.method,
        sol.inclusion_residual
    )?;
    let mut wtr = csv::Writer::from_writer(file);
    let d = sol.v.dim();
    let mut header = vec!["z".to_string(), "t".to_string()];
    header.extend((0..d).map(|k| format!("v_{k}")));
    wtr.write_record(&header)?;
    for (z, v) in sol.v.nodes().iter().zip(sol.v.values()) {
        let mut row = vec![
            format!("{z:.17e}"),
            format!("{:.17e}", problem.params.t_of_z(*z)?),
        ];
        row.extend(v.iter().map(|x| format!("{x:.17e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
