//! A multivalued operator (the indicator of a box, i.e. an obstacle problem)
//! solved along the regularization path `λ_k, δ_k → 0`, with the Cauchy bound
//! between consecutive regularized solutions.

use std::sync::Arc;

use fracpow::extension::{
    cauchy_bound_check, solve, Boundary, ExtensionProblem, Method, SolverConfig,
};
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::make_box;
use nalgebra::DVector;

fn main() -> fracpow::Result<()> {
    let op = Arc::new(make_box(2, -0.5, 0.5)?);
    let p = FracParams::new(0.5)?;
    let mesh = graded_zmesh(256, 10.0, p.default_grading())?;
    let phi = DVector::from_vec(vec![0.3, -0.2]);

    let cfg = SolverConfig::default().with_method(Method::RegularizedPath);
    let problem = ExtensionProblem::new(
        op.clone(),
        p,
        mesh.clone(),
        Boundary::Dirichlet(phi.clone()),
        cfg,
    )?;
    let sol = solve(&problem)?;
    println!(
        "path: converged {}, inclusion residual {:.2e}, v(Z) = {:?}",
        sol.converged,
        sol.inclusion_residual,
        sol.v.values().last().unwrap().as_slice()
    );

    let pairs: Vec<(f64, f64)> = (0..6)
        .map(|k| (0.5f64.powi(k), 0.5f64.powi(k + 1)))
        .collect();
    let report = cauchy_bound_check(op, p, mesh, &phi, 0.25, &pairs)?;
    for c in &report.pairs {
        println!(
            "λ = {:.4}, λ̂ = {:.4}: {:.3e} ≤ {:.3e}",
            c.lambda, c.lambda_hat, c.lhs, c.rhs
        );
    }
    Ok(())
}
