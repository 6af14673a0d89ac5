mod common;

use common::*;
use fracpow::extension::{solve, Boundary};
use fracpow::hilbert::HVector;
use fracpow::mesh::FracParams;
use fracpow::verify::{bessel_scalar_extension, frac_constant};
use nalgebra::DMatrix;

/// `U(t) = Σ_k ϑ(√λ_k t) ⟨φ, e_k⟩ e_k` with the scalar Bessel profile `ϑ`.
fn eigenmode_synthesis(m: &DMatrix<f64>, s: f64, phi: &HVector, t: f64) -> HVector {
    let eig = m.clone().symmetric_eigen();
    let coeffs = eig.eigenvectors.transpose() * phi;
    let mut out = HVector::zeros(phi.len());
    for k in 0..phi.len() {
        let u = bessel_scalar_extension(eig.eigenvalues[k], s, 1.0, t)
            .unwrap()
            .u;
        out += eig.eigenvectors.column(k) * (u * coeffs[k]);
    }
    out
}

#[test]
fn extension_profile_matches_eigenmode_synthesis() {
    let m = spd_with_spectrum(16, 0.1, 10.0, 77);
    let op = linear_op(&m);
    let phi = random_vector(16, &mut rng(8));
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(s).unwrap();
        let d = dtn(op.clone(), s, auto_mesh(&p, 0.1, 1024));
        let sol = solve(&d.problem(Boundary::Dirichlet(phi.clone())).unwrap()).unwrap();
        let t = d.mesh.t_nodes(&p);
        let mut worst = 0.0f64;
        for (ti, vi) in t.iter().zip(sol.v.values()).step_by(7) {
            let exact = eigenmode_synthesis(&m, s, &phi, *ti);
            worst = worst.max((vi - exact).norm() / phi.norm());
        }
        assert!(worst < 1e-3, "s={s}: {worst:.3e}");
    }
}

#[test]
fn robin_trace_matches_spectral_resolvent() {
    let m = spd_with_spectrum(6, 0.2, 5.0, 12);
    let op = linear_op(&m);
    let phi = random_vector(6, &mut rng(1));
    let eig = m.clone().symmetric_eigen();
    for s in [0.3, 0.75] {
        let p = FracParams::new(s).unwrap();
        let d = dtn(op.clone(), s, auto_mesh(&p, 0.2, 1024));
        let c = frac_constant(s).unwrap();
        for lambda in [0.1, 1.0, 4.0] {
            let u = d.resolve(lambda, &phi).unwrap();
            let diag = eig
                .eigenvalues
                .map(|l| 1.0 / (1.0 + lambda * c * l.powf(s)));
            let exact = &eig.eigenvectors
                * DMatrix::from_diagonal(&diag)
                * eig.eigenvectors.transpose()
                * &phi;
            assert!(rel(&u, &exact) < 1e-3, "s={s} λ={lambda}");
        }
    }
}

#[test]
fn half_power_profile_is_exponential() {
    // s = 1/2 and A = a: u(t) = φ e^{−√a t}
    let a = 2.25;
    let op = std::sync::Arc::new(fracpow::monops::make_scalar(1, a).unwrap());
    let p = FracParams::new(0.5).unwrap();
    let d = dtn(op, 0.5, auto_mesh(&p, a, 512));
    let phi = HVector::from_element(1, -1.5);
    let sol = solve(&d.problem(Boundary::Dirichlet(phi.clone())).unwrap()).unwrap();
    for (z, v) in sol.v.nodes().iter().zip(sol.v.values()) {
        assert!((v[0] - phi[0] * (-a.sqrt() * z).exp()).abs() < 1e-4);
    }
}
