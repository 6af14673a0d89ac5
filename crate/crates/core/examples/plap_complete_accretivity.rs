//! Complete contraction of the resolvent of `Λ_s` for a `p`-Laplacian:
//! every normal contraction `j` satisfies `Σ j(Ju − Jû) ≤ Σ j(u − û)`.

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::mesh::{graded_zmesh, FracParams};
use fracpow::monops::{make_plap_grid, GridSpec, LateralBc, LerayLionsField};
use fracpow::verify::{check_map_complete_contraction, sample_pairs, NormalContraction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fracpow::Result<()> {
    let op = Arc::new(make_plap_grid(
        LerayLionsField::p_laplace(3.0, LateralBc::Dirichlet),
        GridSpec::line(8, 1.0 / 9.0),
    )?);
    let p = FracParams::new(0.6)?;
    let mesh = graded_zmesh(128, 12.0, p.default_grading())?;
    let dtn = DtnOperator::new(op, p, mesh, SolverConfig::default())?;
    let pairs = sample_pairs(8, 40, &mut ChaCha8Rng::seed_from_u64(3));
    let report = check_map_complete_contraction(
        |u| dtn.resolve(1.0, u),
        &pairs,
        &NormalContraction::standard_set(),
        1e-8,
    )?;
    for rec in report
        .per_j
        .iter()
        .chain([&report.order_preservation, &report.l1, &report.linf])
    {
        println!("{rec:?}");
    }
    println!(
        "worst margin {:.3e}, pass {}",
        report.worst_margin(),
        report.pass()
    );
    Ok(())
}
