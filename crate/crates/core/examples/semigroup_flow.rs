//! The semigroup `e^{−tΛ_s}` by the exponential formula, for a nonlinear
//! `p`-Laplacian: trajectory norms, pairwise contraction and the generator check.

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FarBc, FracParams};
use fracpow::monops::{make_plap_grid, GridSpec, LateralBc, LerayLionsField};
use fracpow::semigroup::{evolve, generator_audit, trajectory_audit};
use nalgebra::DVector;

fn main() -> fracpow::Result<()> {
    let op = Arc::new(make_plap_grid(
        LerayLionsField::p_laplace(1.8, LateralBc::Neumann),
        GridSpec::line(8, 1.0 / 9.0),
    )?);
    let p = FracParams::new(0.4)?;
    // a Neumann far end keeps constants in the kernel, so the mean is conserved
    let mesh = graded_zmesh(128, 15.0, p.default_grading())?.with_far_bc(FarBc::HomogeneousNeumann);
    let dtn = DtnOperator::new(op, p, mesh, SolverConfig::default())?;

    let a = DVector::from_fn(8, |i, _| (0.4 * i as f64).cos());
    let b = DVector::from_fn(8, |i, _| 0.3 * (0.9 * i as f64).sin());
    let ta = evolve(&dtn, &a, 1.0, 8, None)?;
    let tb = evolve(&dtn, &b, 1.0, 8, None)?;
    for (t, u) in ta.times.iter().zip(&ta.states).step_by(2) {
        println!("t = {t:.3}: ‖u‖ = {:.6}, mean = {:.6}", u.norm(), u.mean());
    }
    let audit = trajectory_audit(&ta, &tb, true)?;
    println!(
        "contraction: max increase {:.2e} (pass {})",
        audit.max_increase, audit.pass
    );
    let gen = generator_audit(&dtn, &ta)?;
    println!(
        "generator: max error {:.2e} (pass {})",
        gen.max_error, gen.pass
    );
    Ok(())
}
