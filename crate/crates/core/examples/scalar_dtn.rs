//! `Λ_s` of a scalar operator `A = a` against the closed form `C(s)·a^s`.

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::make_scalar;
use fracpow::verify::frac_constant;
use nalgebra::DVector;

fn main() -> fracpow::Result<()> {
    let phi = DVector::from_element(1, 1.0);
    println!(
        "{:>5} {:>6} {:>12} {:>12} {:>10}",
        "s", "a", "Λ_s φ", "C(s) a^s", "rel err"
    );
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(s)?;
        for a in [0.5, 4.0, 30.0] {
            let mesh = graded_zmesh(512, p.auto_z(a)?, p.default_grading())?;
            let dtn = DtnOperator::new(
                Arc::new(make_scalar(1, a)?),
                p,
                mesh,
                SolverConfig::default(),
            )?;
            let got = dtn.apply(&phi)?.lambda_s_phi[0];
            let exact = frac_constant(s)? * a.powf(s);
            println!(
                "{s:>5} {a:>6} {got:>12.8} {exact:>12.8} {:>10.2e}",
                (got - exact).abs() / exact
            );
        }
    }
    Ok(())
}
