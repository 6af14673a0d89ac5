//! The square of `Λ_s`: for linear `A`, `Λ_s∘Λ_s = C(s)²·A^{2s}`; for a
//! nonlinear `A` the square is the limit of Yosida differences instead.

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::make_linear_spd;
use fracpow::verify::{frac_constant, spectral_frac_power};
use nalgebra::{DMatrix, DVector};

fn main() -> fracpow::Result<()> {
    let m = DMatrix::from_row_slice(3, 3, &[2.0, -0.5, 0.0, -0.5, 1.5, 0.3, 0.0, 0.3, 1.0]);
    let s = 0.5;
    let p = FracParams::new(s)?;
    let lmin = m.clone().symmetric_eigen().eigenvalues.min();
    let mesh = graded_zmesh(1024, p.auto_z(lmin)?, p.default_grading())?;
    let dtn = DtnOperator::new(
        Arc::new(make_linear_spd(m.clone())?),
        p,
        mesh,
        SolverConfig::default(),
    )?;
    let phi = DVector::from_vec(vec![1.0, 0.0, -1.0]);

    let once = dtn.apply(&phi)?.lambda_s_phi;
    let twice = dtn.apply(&once)?.lambda_s_phi;
    let c = frac_constant(s)?;
    let exact = spectral_frac_power(&m, 2.0 * s)? * &phi * (c * c);
    println!(
        "composition vs C²A^(2s): {:.3e}",
        (&twice - &exact).norm() / exact.norm()
    );
    let sq = dtn.square(&phi, 2e-3)?;
    println!(
        "Yosida square vs composition: {:.3e}",
        (&sq - &twice).norm() / twice.norm()
    );
    Ok(())
}
