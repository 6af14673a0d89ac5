use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{write_vector_csv, BoundaryKind, OperatorSpec, RunConfig};
use super::write_json;
use crate::dtn::{monotonicity_probe, DtnOperator};
use crate::error::{Error, Result};
use crate::extension::{
    audit_estimates, contraction_check, solve as solve_extension, write_solution_csv, Boundary,
    ExtensionProblem, ExtensionSolution,
};
use crate::hilbert::HVector;
use crate::mesh::{graded_zmesh, FracParams};
use crate::monops::{MonotoneOp, SharedOp};
use crate::semigroup::{
    evolve as run_semigroup, generator_audit, write_trajectory_csv, write_u_field,
};
use crate::verify::{
    bessel_scalar_extension, brute_force_bvp, check_complete_contraction, frac_constant,
    sample_pairs, write_report, CheckRecord, NormalContraction,
};

type Outcome = (Value, bool);

struct Instance {
    s: f64,
    params: FracParams,
    op: SharedOp,
    dtn: DtnOperator,
    dir: PathBuf,
}

impl Instance {
    fn problem(&self, boundary: Boundary) -> Result<ExtensionProblem> {
        self.dtn.problem(boundary)
    }
}

/// One instance per `s`; several values get one subdirectory each.
fn instances(cfg: &RunConfig, dir: &Path) -> Result<Vec<Instance>> {
    let op = cfg.operator.build()?;
    cfg.s_values
        .iter()
        .map(|&s| {
            let params = FracParams::new(s).map_err(|e| Error::config("frac.s", e.to_string()))?;
            let mesh = cfg.mesh.build(&params, &cfg.operator)?;
            let dtn = DtnOperator::new(op.clone(), params, mesh, cfg.solver.clone())?;
            let dir = if cfg.s_values.len() == 1 {
                dir.to_path_buf()
            } else {
                dir.join(format!("s_{s}"))
            };
            std::fs::create_dir_all(&dir)?;
            Ok(Instance {
                s,
                params,
                op: op.clone(),
                dtn,
                dir,
            })
        })
        .collect()
}

/// Runs `f` on every instance in parallel and gathers the outcomes in order.
fn sweep(
    cfg: &RunConfig,
    dir: &Path,
    f: impl Fn(&Instance) -> Result<Outcome> + Sync,
) -> Result<Outcome> {
    let inst = instances(cfg, dir)?;
    let results: Vec<Outcome> = inst
        .par_iter()
        .map(|i| f(i).map_err(|e| with_context(e, i.s)))
        .collect::<Result<_>>()?;
    let pass = results.iter().all(|r| r.1);
    Ok((
        Value::Array(results.into_iter().map(|r| r.0).collect()),
        pass,
    ))
}

fn with_context(e: Error, s: f64) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::InvalidParameter {
            name: format!("s = {s}"),
            reason: other.to_string(),
        },
    }
}

fn vec_json(v: &HVector) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn rng_for(cfg: &RunConfig, s: f64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ s.to_bits().rotate_left(17));
    rng.set_stream(stream);
    rng
}

fn solution_summary(sol: &ExtensionSolution) -> Value {
    json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "inclusion_residual": sol.inclusion_residual,
        "eps_disc": sol.eps_disc,
        "trace_v0": vec_json(&sol.trace_v0),
        "trace_dv0": vec_json(&sol.trace_dv0),
    })
}

pub fn solve(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let phi = cfg.phi()?.clone();
    sweep(cfg, dir, |inst| {
        let boundary = match cfg.run.boundary {
            BoundaryKind::Dirichlet => Boundary::Dirichlet(phi.clone()),
            BoundaryKind::Robin => Boundary::Robin {
                lambda: cfg.run.lambda,
                phi: phi.clone(),
            },
        };
        let problem = inst.problem(boundary)?;
        let sol = solve_problem(&problem)?;
        write_solution_csv(&sol, &problem, &inst.dir.join("solution.csv"))?;
        let audit = audit_estimates(&sol, &problem)?;
        write_json(&inst.dir.join("audit.json"), &serde_json::to_value(&audit)?)?;
        let pass = sol.converged && audit.all_pass();
        let failed: Vec<&str> = audit
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Ok((
            json!({ "s": inst.s, "solution": solution_summary(&sol), "audit_pass": audit.all_pass(), "audit_failed": failed, "pass": pass }),
            pass,
        ))
    })
}

fn solve_problem(problem: &ExtensionProblem) -> Result<ExtensionSolution> {
    let sol = solve_extension(problem)?;
    if !sol.converged {
        return Err(Error::NonConvergence {
            what: "extension solve".into(),
            iterations: sol.iterations,
            residual: sol.inclusion_residual,
        });
    }
    Ok(sol)
}

pub fn dtn_apply(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let phi = cfg.phi()?.clone();
    sweep(cfg, dir, |inst| {
        let r = inst.dtn.apply(&phi)?;
        write_vector_csv(
            &inst.dir.join("lambda_s_phi.csv"),
            "lambda_s_phi",
            &r.lambda_s_phi,
        )?;
        let pass = r.solution.converged;
        Ok((
            json!({
                "s": inst.s,
                "lambda_s_phi": vec_json(&r.lambda_s_phi),
                "trace_diagnostics": serde_json::to_value(&r.trace_diagnostics)?,
                "solution": solution_summary(&r.solution),
                "pass": pass,
            }),
            pass,
        ))
    })
}

pub fn dtn_resolve(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let phi = cfg.phi()?.clone();
    let lambda = cfg.run.lambda;
    sweep(cfg, dir, |inst| {
        let sol = inst.dtn.resolve_from(lambda, &phi, None)?;
        let u = sol.trace_v0.clone();
        write_vector_csv(&inst.dir.join("resolvent.csv"), "u", &u)?;
        let residual = inst.dtn.resolvent_identity_residual(lambda, &phi, &u)?;
        let tolerance = 5.0 * cfg.solver.tol * (1.0 + phi.norm());
        let pass = residual <= tolerance;
        Ok((
            json!({
                "s": inst.s,
                "lambda": lambda,
                "u": vec_json(&u),
                "identity_residual": residual,
                "tolerance": tolerance,
                "solution": solution_summary(&sol),
                "pass": pass,
            }),
            pass,
        ))
    })
}

pub fn evolve(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let phi = cfg.phi()?.clone();
    sweep(cfg, dir, |inst| {
        let traj = run_semigroup(
            &inst.dtn,
            &phi,
            cfg.run.t_final,
            cfg.run.m,
            cfg.run.record_stride,
        )?;
        write_trajectory_csv(&traj, &inst.dir.join("trajectory.csv"))?;
        if traj.u_field.is_some() {
            let fdir = inst.dir.join("u_field");
            std::fs::create_dir_all(&fdir)?;
            write_u_field(&traj, &fdir)?;
        }
        let gen = generator_audit(&inst.dtn, &traj)?;
        let pass = gen.pass;
        Ok((
            json!({
                "s": inst.s,
                "t_final": cfg.run.t_final,
                "m": cfg.run.m,
                "final_state": vec_json(traj.states.last().unwrap()),
                "max_step_residual": traj.max_step_residual,
                "eps_disc": traj.eps_disc,
                "generator_audit": serde_json::to_value(&gen)?,
                "pass": pass,
            }),
            pass,
        ))
    })
}

/// `(M, is_scalar)` for operators with a closed-form spectral calculus.
fn linear_matrix(spec: &OperatorSpec) -> Option<DMatrix<f64>> {
    match spec {
        OperatorSpec::LinearSpd { matrix } => Some(matrix.clone()),
        OperatorSpec::Scalar { dim, a } => Some(DMatrix::identity(*dim, *dim) * *a),
        _ => None,
    }
}

/// `f(M) v` through the symmetric eigendecomposition.
fn spectral_apply(m: &DMatrix<f64>, v: &HVector, f: impl Fn(f64) -> f64) -> HVector {
    let eig = m.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let coeffs = q.transpose() * v;
    let scaled = HVector::from_fn(coeffs.len(), |i, _| {
        f(eig.eigenvalues[i].max(0.0)) * coeffs[i]
    });
    q * scaled
}

fn applicable(check: &str, spec: &OperatorSpec, op: &dyn MonotoneOp) -> bool {
    match check {
        "spectral" => linear_matrix(spec).is_some(),
        "bessel" => matches!(spec, OperatorSpec::Scalar { .. }),
        "brute" => op.is_single_valued() && op.dim() * 10 <= 200,
        "complete_contraction" => !matches!(spec, OperatorSpec::LinearSpd { .. }),
        _ => true,
    }
}

pub fn verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let op = cfg.operator.build()?;
    let checks: Vec<String> = if cfg.run.checks.is_empty() {
        super::config::CHECKS
            .iter()
            .filter(|c| applicable(c, &cfg.operator, op.as_ref()))
            .map(|c| c.to_string())
            .collect()
    } else {
        for (i, c) in cfg.run.checks.iter().enumerate() {
            if !applicable(c, &cfg.operator, op.as_ref()) {
                return Err(Error::config(
                    &format!("run.checks[{i}]"),
                    format!("`{c}` does not apply to this operator"),
                ));
            }
        }
        cfg.run.checks.clone()
    };
    let (summary, pass) = sweep(cfg, dir, |inst| {
        let mut records = Vec::new();
        for (k, check) in checks.iter().enumerate() {
            let mut rng = rng_for(cfg, inst.s, k as u64);
            let rec = run_check(cfg, inst, check, &mut rng)?;
            records.push(rec);
        }
        write_report(&inst.dir.join("report.json"), &records)?;
        let pass = records.iter().all(|r| r.pass);
        Ok((
            json!({ "s": inst.s, "checks": serde_json::to_value(&records)?, "pass": pass }),
            pass,
        ))
    })?;
    Ok((summary, pass))
}

/// Data for sampled checks: the configured `φ` first, then random vectors.
fn samples(cfg: &RunConfig, dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<HVector> {
    let mut out: Vec<HVector> = cfg.run.phi.iter().cloned().collect();
    out.extend(sample_pairs(dim, count, rng).into_iter().map(|p| p.0));
    out.truncate(count.max(1));
    out
}

fn run_check(
    cfg: &RunConfig,
    inst: &Instance,
    check: &str,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord> {
    let dim = inst.op.dim();
    let tol = cfg.solver.tol;
    let pairs = cfg.run.pairs;
    Ok(match check {
        "spectral" => {
            let m = linear_matrix(&cfg.operator).expect("checked by applicable");
            let c = frac_constant(inst.s)?;
            let errors = samples(cfg, dim, 5, rng)
                .par_iter()
                .map(|phi| {
                    let exact = spectral_apply(&m, phi, |l| c * l.powf(inst.s));
                    let got = inst.dtn.apply(phi)?.lambda_s_phi;
                    Ok((got - &exact).norm() / exact.norm().max(f64::MIN_POSITIVE))
                })
                .collect::<Result<Vec<f64>>>()?;
            CheckRecord::from_errors("spectral", &errors, cfg.run.spectral_tol)
        }
        "bessel" => {
            let OperatorSpec::Scalar { a, .. } = cfg.operator else {
                unreachable!("checked by applicable")
            };
            let mut errors = Vec::new();
            for phi in samples(cfg, dim, 3, rng) {
                let sol = solve_problem(&inst.problem(Boundary::Dirichlet(phi.clone()))?)?;
                let scale = phi.amax().max(f64::MIN_POSITIVE);
                let mut err = 0.0f64;
                for (z, v) in sol.v.nodes().iter().zip(sol.v.values()) {
                    let t = inst.params.t_of_z(*z)?;
                    for (j, pj) in phi.iter().enumerate() {
                        let exact = bessel_scalar_extension(a, inst.s, *pj, t)?.u;
                        err = err.max((v[j] - exact).abs() / scale);
                    }
                }
                errors.push(err);
            }
            CheckRecord::from_errors("bessel", &errors, cfg.run.spectral_tol)
        }
        "brute" => {
            let mesh = graded_zmesh(10, 6.0, 2.0)?.with_far_bc(inst.dtn.mesh.far_bc);
            let errors = samples(cfg, dim, 3, rng)
                .iter()
                .map(|phi| {
                    let problem = ExtensionProblem::new(
                        inst.op.clone(),
                        inst.params,
                        mesh.clone(),
                        Boundary::Dirichlet(phi.clone()),
                        cfg.solver.clone(),
                    )?;
                    let sol = solve_problem(&problem)?;
                    let oracle = brute_force_bvp(inst.op.as_ref(), inst.params, phi, &mesh)?;
                    sol.v.max_dist(&oracle.v)
                })
                .collect::<Result<Vec<f64>>>()?;
            CheckRecord::from_errors("brute", &errors, 1e-6)
        }
        "estimates" => {
            let reports = samples(cfg, dim, 3, rng)
                .par_iter()
                .map(|phi| {
                    let problem = inst.problem(Boundary::Dirichlet(phi.clone()))?;
                    let sol = solve_problem(&problem)?;
                    audit_estimates(&sol, &problem)
                })
                .collect::<Result<Vec<_>>>()?;
            write_json(
                &inst.dir.join("estimates.json"),
                &serde_json::to_value(&reports)?,
            )?;
            let worst = reports
                .iter()
                .flat_map(|r| &r.checks)
                .map(|c| c.slack)
                .fold(f64::INFINITY, f64::min);
            CheckRecord::from_margin(
                "estimates",
                reports.len(),
                worst,
                reports.iter().all(|r| r.all_pass()),
            )
        }
        "contraction" => {
            let reports = sample_pairs(dim, pairs, rng)
                .par_iter()
                .map(|(a, b)| {
                    let sa = solve_problem(&inst.problem(Boundary::Dirichlet(a.clone()))?)?;
                    let sb = solve_problem(&inst.problem(Boundary::Dirichlet(b.clone()))?)?;
                    contraction_check(&sa, &sb)
                })
                .collect::<Result<Vec<_>>>()?;
            let worst = reports
                .iter()
                .map(|r| r.tolerance - r.max_increase)
                .fold(f64::INFINITY, f64::min);
            CheckRecord::from_margin(
                "contraction",
                reports.len(),
                worst,
                reports.iter().all(|r| r.pass),
            )
        }
        "monotonicity" => {
            let rep = monotonicity_probe(&inst.dtn, &sample_pairs(dim, pairs, rng))?;
            CheckRecord::from_margin(
                "monotonicity",
                rep.values.len(),
                rep.min + rep.tolerance,
                rep.pass,
            )
        }
        "robin" => {
            let lambda = cfg.run.lambda;
            let errors = samples(cfg, dim, 3, rng)
                .par_iter()
                .map(|phi| {
                    let u = inst.dtn.resolve(lambda, phi)?;
                    Ok(inst.dtn.resolvent_identity_residual(lambda, phi, &u)? / (1.0 + phi.norm()))
                })
                .collect::<Result<Vec<f64>>>()?;
            CheckRecord::from_errors("robin", &errors, 5.0 * tol)
        }
        "complete_contraction" => {
            let lambda = cfg.run.lambda;
            let pairs = sample_pairs(dim, pairs, rng);
            let images = pairs
                .par_iter()
                .map(|(a, b)| Ok((inst.dtn.resolve(lambda, a)?, inst.dtn.resolve(lambda, b)?)))
                .collect::<Result<Vec<_>>>()?;
            let rep = check_complete_contraction(
                &pairs,
                &images,
                &NormalContraction::standard_set(),
                1e-8,
            )?;
            write_json(
                &inst.dir.join("complete_contraction.json"),
                &serde_json::to_value(&rep)?,
            )?;
            CheckRecord::from_margin(
                "complete_contraction",
                rep.instances,
                rep.worst_margin(),
                rep.pass(),
            )
        }
        other => {
            return Err(Error::config(
                "run.checks",
                format!("unknown check `{other}`"),
            ))
        }
    })
}

pub fn converge(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let phi = cfg.phi()?.clone();
    let exact_matrix = linear_matrix(&cfg.operator);
    sweep(cfg, dir, |inst| {
        let c = frac_constant(inst.s)?;
        let exact_lambda = exact_matrix
            .as_ref()
            .map(|m| spectral_apply(m, &phi, |l| c * l.powf(inst.s)));
        let mut ns = cfg.run.n_list.clone();
        ns.sort_unstable();
        let values = ns
            .par_iter()
            .map(|&n| {
                let mesh = cfg.mesh.build_with(&inst.params, &cfg.operator, n)?;
                let dtn = DtnOperator::new(
                    inst.op.clone(),
                    inst.params,
                    mesh.clone(),
                    cfg.solver.clone(),
                )?;
                Ok((
                    mesh.widths()[0],
                    mesh.z_max(),
                    dtn.apply(&phi)?.lambda_s_phi,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let reference = exact_lambda
            .clone()
            .unwrap_or_else(|| values.last().unwrap().2.clone());
        let mut wtr = csv::Writer::from_path(inst.dir.join("mesh_convergence.csv"))?;
        wtr.write_record(["n", "z_max", "h0", "error", "order"])?;
        let mut mesh_rows = Vec::new();
        let mut prev: Option<(usize, f64)> = None;
        for (&n, (h0, z, val)) in ns.iter().zip(&values) {
            let err = (val - &reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
            let order = match prev {
                Some((pn, pe)) if err > 0.0 && pe > 0.0 => {
                    (pe / err).ln() / (n as f64 / pn as f64).ln()
                }
                _ => f64::NAN,
            };
            wtr.write_record([
                n.to_string(),
                format!("{z:.17e}"),
                format!("{h0:.17e}"),
                format!("{err:.17e}"),
                format!("{order:.6}"),
            ])?;
            mesh_rows.push(json!({ "n": n, "error": err }));
            prev = Some((n, err));
        }
        wtr.flush()?;

        let mut ms = cfg.run.m_list.clone();
        ms.sort_unstable();
        let t = cfg.run.t_final;
        let finals = ms
            .par_iter()
            .map(|&m| {
                Ok(run_semigroup(&inst.dtn, &phi, t, m, None)?
                    .states
                    .last()
                    .unwrap()
                    .clone())
            })
            .collect::<Result<Vec<HVector>>>()?;
        let exact_state = exact_matrix
            .as_ref()
            .map(|m| spectral_apply(m, &phi, |l| (-t * c * l.powf(inst.s)).exp()));
        let reference = exact_state
            .clone()
            .unwrap_or_else(|| finals.last().unwrap().clone());
        let mut wtr = csv::Writer::from_path(inst.dir.join("substep_convergence.csv"))?;
        wtr.write_record(["m", "error", "ratio"])?;
        let mut step_rows = Vec::new();
        let mut prev: Option<f64> = None;
        for (&m, state) in ms.iter().zip(&finals) {
            let err = (state - &reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
            let ratio = prev.map_or(f64::NAN, |p| if err > 0.0 { p / err } else { f64::NAN });
            wtr.write_record([m.to_string(), format!("{err:.17e}"), format!("{ratio:.6}")])?;
            step_rows.push(json!({ "m": m, "error": err }));
            prev = Some(err);
        }
        wtr.flush()?;
        Ok((
            json!({
                "s": inst.s,
                "mesh_reference": if exact_lambda.is_some() { "spectral" } else { "finest mesh" },
                "substep_reference": if exact_state.is_some() { "spectral" } else { "finest substep count" },
                "mesh": mesh_rows,
                "substeps": step_rows,
                "pass": true,
            }),
            true,
        ))
    })
}
