//! The resolvent `J_λ = (I + λΛ_s)⁻¹` through the Robin extension problem,
//! with its identity residual `‖u + λΛ_s u − φ‖` and non-expansiveness.

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::{make_plap_grid, GridSpec, LateralBc, LerayLionsField};
use nalgebra::DVector;
use std::sync::Arc;

fn main() -> fracpow::Result<()> {
    let op = Arc::new(make_plap_grid(
        LerayLionsField::p_laplace(3.0, LateralBc::Dirichlet),
        GridSpec::line(8, 1.0 / 9.0),
    )?);
    let p = FracParams::new(0.5)?;
    let dtn = DtnOperator::new(
        op,
        p,
        graded_zmesh(256, 12.0, p.default_grading())?,
        SolverConfig::default(),
    )?;
    let phi = DVector::from_fn(8, |i, _| (i as f64 * 0.7).cos());
    let psi = DVector::from_fn(8, |i, _| 0.5 - 0.1 * i as f64);
    for lambda in [0.1, 1.0, 10.0] {
        let u = dtn.resolve(lambda, &phi)?;
        let v = dtn.resolve(lambda, &psi)?;
        let residual = dtn.resolvent_identity_residual(lambda, &phi, &u)?;
        println!(
            "λ = {lambda:>4}: ‖J φ‖ = {:.6}, identity residual {residual:.2e}, ‖Jφ − Jψ‖/‖φ − ψ‖ = {:.4}",
            u.norm(),
            (&u - &v).norm() / (&phi - &psi).norm()
        );
    }
    Ok(())
}
