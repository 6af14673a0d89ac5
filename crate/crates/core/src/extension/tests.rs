use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::*;
use crate::mesh::{graded_zmesh, FarBc};
use crate::monops::{make_linear_spd, make_scalar, MonotoneOp};

fn scalar_problem(
    a: f64,
    s: f64,
    boundary: Boundary,
    n: usize,
    z: f64,
    cfg: SolverConfig,
) -> ExtensionProblem {
    let op = Arc::new(make_scalar(1, a).unwrap());
    let mesh = graded_zmesh(n, z, 2.0).unwrap();
    ExtensionProblem::new(op, FracParams::new(s).unwrap(), mesh, boundary, cfg).unwrap()
}

fn one(x: f64) -> HVector {
    DVector::from_element(1, x)
}

fn interpolate(sol: &ExtensionSolution, z: f64) -> f64 {
    let nodes = sol.v.nodes();
    let i = nodes.partition_point(|&x| x <= z) - 1;
    let th = (z - nodes[i]) / (nodes[i + 1] - nodes[i]);
    sol.v.values()[i][0] * (1.0 - th) + sol.v.values()[i + 1][0] * th
}

#[test]
fn zero_data_gives_stationary_solution() {
    for method in [Method::Splitting, Method::RegularizedPath] {
        let p = scalar_problem(
            4.0,
            0.3,
            Boundary::Dirichlet(one(0.0)),
            16,
            5.0,
            SolverConfig::default().with_method(method),
        );
        let sol = solve(&p).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.inclusion_residual, 0.0);
        assert!(sol.v.values().iter().all(|v| v[0] == 0.0));
    }
}

#[test]
fn half_power_dirichlet_is_exponential() {
    let p = scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(1.0)),
        512,
        20.0,
        SolverConfig::default(),
    );
    let sol = solve(&p).unwrap();
    assert!(sol.converged, "residual {}", sol.inclusion_residual);
    assert_eq!(sol.trace_v0[0], 1.0);
    assert!((interpolate(&sol, 1.0) - (-2.0f64).exp()).abs() < 1e-4);
    assert!(
        (sol.trace_dv0[0] + 2.0).abs() < 1e-4,
        "{}",
        sol.trace_dv0[0]
    );
}

#[test]
fn half_power_robin_row() {
    let p = scalar_problem(
        4.0,
        0.5,
        Boundary::Robin {
            lambda: 1.0,
            phi: one(3.0),
        },
        512,
        20.0,
        SolverConfig::default(),
    );
    let sol = solve(&p).unwrap();
    assert!(sol.converged);
    assert!((sol.trace_v0[0] - 1.0).abs() < 1e-4, "{}", sol.trace_v0[0]);
    // the discrete Robin row holds with the flux trace
    let row = -p.params.trace_const * sol.trace_dv0[0] + sol.trace_v0[0];
    assert!((row - 3.0).abs() < 1e-9, "{row}");
}

#[test]
fn methods_agree_on_coarse_mesh() {
    for s in [0.25, 0.5, 0.75] {
        let base = scalar_problem(
            2.0,
            s,
            Boundary::Dirichlet(one(1.5)),
            10,
            6.0,
            SolverConfig::default(),
        );
        let a = solve(&base).unwrap();
        let mut path = base.clone();
        path.cfg.method = Method::RegularizedPath;
        let b = solve(&path).unwrap();
        assert!(a.converged && b.converged);
        let diff = a.v.max_dist(&b.v).unwrap();
        assert!(diff < 1e-8, "s={s}: {diff}");
    }
}

#[test]
fn neumann_far_boundary() {
    let mut p = scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(1.0)),
        512,
        20.0,
        SolverConfig::default(),
    );
    p.mesh = p.mesh.clone().with_far_bc(FarBc::HomogeneousNeumann);
    let sol = solve(&p).unwrap();
    assert!(sol.converged);
    assert!((sol.trace_dv0[0] + 2.0).abs() < 1e-4);
    assert!(sol.v_prime.values().last().unwrap()[0].abs() < 1e-12);
}

#[test]
fn audit_examples() {
    let p = scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(1.0)),
        1024,
        20.0,
        SolverConfig::default(),
    );
    let sol = solve(&p).unwrap();
    let rep = audit_estimates(&sol, &p).unwrap();
    let c = rep.get("t_derivative_l2").unwrap();
    assert!((c.lhs - 0.5).abs() < 1e-3, "{}", c.lhs);
    assert!((c.rhs - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(rep.all_pass(), "{rep:#?}");
    assert!(rep.eps_disc <= 0.05);

    let z = scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(0.0)),
        64,
        20.0,
        SolverConfig::default(),
    );
    let zs = solve(&z).unwrap();
    let rep = audit_estimates(&zs, &z).unwrap();
    assert!(rep.all_pass());
    assert!(rep.checks.iter().all(|c| c.lhs == 0.0));
}

#[test]
fn branch_coefficient_for_small_s() {
    let expected = 0.5 * 3.25f64.sqrt() / 2f64.sqrt();
    assert!((audit::t_flux_derivative_coefficient(0.25) - expected).abs() < 1e-15);
    assert_eq!(
        audit::t_flux_derivative_coefficient(0.4995),
        0.4995f64.sqrt()
    );
}

#[test]
fn contraction_examples() {
    let p1 = scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(1.0)),
        256,
        20.0,
        SolverConfig::default(),
    );
    let a = solve(&p1).unwrap();
    let same = contraction_check(&a, &a).unwrap();
    assert_eq!(same.max_increase, 0.0);
    let mut p2 = p1.clone();
    p2.boundary = Boundary::Dirichlet(one(2.0));
    let b = solve(&p2).unwrap();
    let rep = contraction_check(&a, &b).unwrap();
    assert!(rep.pass, "{rep:?}");
    let other = solve(&scalar_problem(
        4.0,
        0.5,
        Boundary::Dirichlet(one(1.0)),
        128,
        20.0,
        SolverConfig::default(),
    ))
    .unwrap();
    assert!(contraction_check(&a, &other).is_err());
}

#[test]
fn cauchy_bound_scalar_and_identity_pair() {
    let op: crate::monops::SharedOp = Arc::new(make_scalar(1, 1.0).unwrap());
    let mesh = graded_zmesh(64, 12.0, 2.0).unwrap();
    let rep = cauchy_bound_check(
        op,
        FracParams::new(0.5).unwrap(),
        mesh,
        &one(1.0),
        0.1,
        &[(1e-2, 5e-3), (1e-2, 1e-2)],
    )
    .unwrap();
    assert!(rep.all_pass(), "{rep:?}");
    assert!(rep.pairs[0].lhs / rep.pairs[0].rhs < 1.0);
    assert_eq!(rep.pairs[1].lhs, 0.0);
}

#[test]
fn regularized_stage_matches_direct_linear_solve() {
    // K v − b + D (M(I + λM)⁻¹ v + δ v) = 0 is linear for a matrix operator
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            4.0, 1.0, 0.0, 0.5, 1.0, 3.0, 0.2, 0.0, 0.0, 0.2, 2.0, 0.3, 0.5, 0.0, 0.3, 1.0,
        ],
    );
    let op = Arc::new(make_linear_spd(m.clone()).unwrap());
    let mesh = graded_zmesh(12, 8.0, 2.0).unwrap();
    let phi = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
    let problem = ExtensionProblem::new(
        op.clone(),
        FracParams::new(0.4).unwrap(),
        mesh,
        Boundary::Dirichlet(phi),
        SolverConfig::default(),
    )
    .unwrap();
    let disc = Discretization::new(&problem).unwrap();
    let (lam, del) = (1e-2, 0.1);
    let v = path::stage_solution(&problem, &disc, lam, del).unwrap();

    let (n, d) = (disc.n_free(), 4);
    let ml = &m * (DMatrix::identity(d, d) + &m * lam).try_inverse().unwrap();
    let mut big = DMatrix::zeros(n * d, n * d);
    let mut rhs = DVector::zeros(n * d);
    for k in 0..n {
        let block = DMatrix::identity(d, d) * disc.k_diag[k]
            + (&ml + DMatrix::identity(d, d) * del) * disc.omega[k];
        big.view_mut((k * d, k * d), (d, d)).copy_from(&block);
        if k + 1 < n {
            for r in 0..d {
                big[(k * d + r, (k + 1) * d + r)] = disc.k_off[k];
                big[((k + 1) * d + r, k * d + r)] = disc.k_off[k];
            }
        }
        for r in 0..d {
            rhs[k * d + r] = disc.b[(r, k)];
        }
    }
    let exact = big.lu().solve(&rhs).unwrap();
    for k in 0..n {
        for r in 0..d {
            assert!((v[(r, k)] - exact[k * d + r]).abs() < 1e-9);
        }
    }
    assert!(op.dim() == 4);
}

#[test]
fn rejects_invalid_problems() {
    let op: crate::monops::SharedOp = Arc::new(make_scalar(2, 1.0).unwrap());
    let mesh = graded_zmesh(16, 4.0, 2.0).unwrap();
    let p = FracParams::new(0.5).unwrap();
    assert!(ExtensionProblem::new(
        op.clone(),
        p,
        mesh.clone(),
        Boundary::Dirichlet(one(1.0)),
        SolverConfig::default()
    )
    .is_err());
    let robin = Boundary::Robin {
        lambda: 0.0,
        phi: DVector::from_element(2, 1.0),
    };
    assert!(
        ExtensionProblem::new(op.clone(), p, mesh.clone(), robin, SolverConfig::default()).is_err()
    );
    let cfg = SolverConfig {
        mu: -1.0,
        ..SolverConfig::default()
    };
    assert!(ExtensionProblem::new(
        op,
        p,
        mesh,
        Boundary::Dirichlet(DVector::from_element(2, 1.0)),
        cfg
    )
    .is_err());
}
