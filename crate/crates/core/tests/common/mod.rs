#![allow(dead_code)]

use std::sync::Arc;

use fracpow::dtn::DtnOperator;
use fracpow::extension::SolverConfig;
use fracpow::hilbert::HVector;
use fracpow::mesh::{graded_zmesh, FracParams, ZMesh};
use fracpow::monops::{
    make_linear_spd, make_plap_grid, GridSpec, LateralBc, LerayLionsField, LinearSpd, SharedOp,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with log-spaced spectrum in `[lo, hi]` and a random orthogonal basis.
pub fn spd_with_spectrum(n: usize, lo: f64, hi: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let d = DVector::from_fn(n, |i, _| lo * (hi / lo).powf(i as f64 / (n - 1) as f64));
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_vector(n: usize, r: &mut ChaCha8Rng) -> HVector {
    DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal))
}

pub fn linear_op(m: &DMatrix<f64>) -> Arc<LinearSpd> {
    Arc::new(make_linear_spd(m.clone()).unwrap())
}

/// Mesh with automatic truncation radius and grading.
pub fn auto_mesh(p: &FracParams, lambda_min: f64, n: usize) -> ZMesh {
    graded_zmesh(n, p.auto_z(lambda_min).unwrap(), p.default_grading()).unwrap()
}

pub fn dtn(op: SharedOp, s: f64, mesh: ZMesh) -> DtnOperator {
    DtnOperator::new(
        op,
        FracParams::new(s).unwrap(),
        mesh,
        SolverConfig::default(),
    )
    .unwrap()
}

/// The 8-node one-dimensional `p`-Laplacian with homogeneous Dirichlet lateral condition.
pub fn plap8(p: f64) -> SharedOp {
    Arc::new(
        make_plap_grid(
            LerayLionsField::p_laplace(p, LateralBc::Dirichlet),
            GridSpec::line(8, 1.0 / 9.0),
        )
        .unwrap(),
    )
}

/// The 2-node `p`-Laplacian with Neumann lateral condition, unit spacing.
pub fn plap2(p: f64) -> SharedOp {
    Arc::new(
        make_plap_grid(
            LerayLionsField::p_laplace(p, LateralBc::Neumann),
            GridSpec::line(2, 1.0),
        )
        .unwrap(),
    )
}

pub fn rel(a: &HVector, b: &HVector) -> f64 {
    (a - b).norm() / b.norm()
}

/// Writes the criterion line straight to stderr so it shows without `--nocapture`.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!(
        "criterion {criterion}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}
