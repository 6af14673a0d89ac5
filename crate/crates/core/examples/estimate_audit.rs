//! The a priori estimates of the extension problem, checked on a solution.
//! Each line prints the measured side, the bound and the slack.

use std::sync::Arc;

use fracpow::extension::{audit_estimates, solve, Boundary, ExtensionProblem, SolverConfig};
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::make_power_prox;
use nalgebra::DVector;

fn main() -> fracpow::Result<()> {
    let op = Arc::new(make_power_prox(3, 1.0, 3.0)?);
    let phi = DVector::from_vec(vec![0.8, -0.4, 0.1]);
    for s in [0.3, 0.5] {
        let p = FracParams::new(s)?;
        let mesh = graded_zmesh(512, 20.0, p.default_grading())?;
        let problem = ExtensionProblem::new(
            op.clone(),
            p,
            mesh,
            Boundary::Dirichlet(phi.clone()),
            SolverConfig::default(),
        )?;
        let sol = solve(&problem)?;
        let report = audit_estimates(&sol, &problem)?;
        println!("s = {s} (ε_disc = {:.1e})", report.eps_disc);
        for c in &report.checks {
            println!(
                "  {:<32} {:>11.4e} ≤ {:>11.4e}  {}",
                c.name,
                c.lhs,
                c.rhs,
                if c.pass { "ok" } else { "VIOLATED" }
            );
        }
    }
    Ok(())
}
