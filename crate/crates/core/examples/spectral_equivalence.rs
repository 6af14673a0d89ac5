//! For a symmetric positive definite matrix the extension reproduces the
//! spectral fractional power: `Λ_s φ = C(s)·M^s φ`.

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::make_linear_spd;
use fracpow::verify::{frac_constant, spectral_frac_power};
use nalgebra::{DMatrix, DVector};

fn main() -> fracpow::Result<()> {
    let n = 16;
    // 1D Dirichlet Laplacian plus a small shift
    let h = 1.0 / (n + 1) as f64;
    let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 / (h * h) + 0.1,
        1 => -1.0 / (h * h),
        _ => 0.0,
    });
    let lambda_min = m.clone().symmetric_eigen().eigenvalues.min();
    let phi = DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * h * 3.0).sin());
    let op = Arc::new(make_linear_spd(m.clone())?);
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(s)?;
        let mesh = graded_zmesh(1024, p.auto_z(lambda_min)?, p.default_grading())?;
        let dtn = DtnOperator::new(op.clone(), p, mesh, SolverConfig::default())?;
        let got = dtn.apply(&phi)?.lambda_s_phi;
        let exact = spectral_frac_power(&m, s)? * &phi * frac_constant(s)?;
        println!(
            "s = {s}: relative error {:.3e}",
            (&got - &exact).norm() / exact.norm()
        );
    }
    Ok(())
}
