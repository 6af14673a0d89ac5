//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL | detail`
//! line; run with `--nocapture` to see them.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use fracpow::dtn::DtnOperator;
use fracpow::extension::{
    audit_estimates, cauchy_bound_check, contraction_check, solve, t_flux_derivative_coefficient,
    Boundary, ExtensionProblem, ExtensionSolution, Method, SolverConfig,
};
use fracpow::hilbert::HVector;
use fracpow::mesh::{graded_zmesh, FracParams, ZMesh};
use fracpow::monops::{make_scalar, minimal_selection, SharedOp};
use fracpow::semigroup::evolve;
use fracpow::verify::{
    bessel_scalar_extension, brute_force_bvp, check_complete_contraction, frac_constant,
    sample_pairs, spectral_frac_power, NormalContraction,
};
use nalgebra::{DMatrix, DVector};

const S_VALUES: [f64; 3] = [0.25, 0.5, 0.75];

fn scalar(a: f64) -> SharedOp {
    Arc::new(make_scalar(1, a).unwrap())
}

fn one(x: f64) -> HVector {
    DVector::from_element(1, x)
}

fn plap_mesh(s: f64, n: usize) -> ZMesh {
    let p = FracParams::new(s).unwrap();
    graded_zmesh(n, 20.0, p.default_grading()).unwrap()
}

fn dirichlet(d: &DtnOperator, phi: &HVector) -> (ExtensionProblem, ExtensionSolution) {
    let problem = d.problem(Boundary::Dirichlet(phi.clone())).unwrap();
    let sol = solve(&problem).unwrap();
    assert!(sol.converged, "solve did not converge");
    (problem, sol)
}

/// Named instances shared by the property criteria.
fn instances(n_linear: usize) -> Vec<(String, DtnOperator, Vec<HVector>)> {
    let m = spd_with_spectrum(16, 0.1, 10.0, 2024);
    let lin = linear_op(&m);
    let mut r = rng(11);
    let lin_phis: Vec<HVector> = (0..2).map(|_| random_vector(16, &mut r)).collect();
    let plap_phis: Vec<HVector> = (0..2).map(|_| random_vector(8, &mut r) * 0.5).collect();
    let mut out = Vec::new();
    for s in S_VALUES {
        let p = FracParams::new(s).unwrap();
        out.push((
            format!("scalar a=4 s={s}"),
            dtn(scalar(4.0), s, auto_mesh(&p, 4.0, 1024)),
            vec![one(1.0), one(-2.5)],
        ));
        out.push((
            format!("linear16 s={s}"),
            dtn(lin.clone(), s, auto_mesh(&p, 0.1, n_linear)),
            lin_phis.clone(),
        ));
        out.push((
            format!("plap8 s={s}"),
            dtn(plap8(3.0), s, plap_mesh(s, 512)),
            plap_phis.clone(),
        ));
    }
    out
}

#[test]
fn linear_spectral_equivalence() {
    let t0 = Instant::now();
    let m = spd_with_spectrum(16, 0.1, 10.0, 2024);
    let op = linear_op(&m);
    let mut r = rng(7);
    let phis: Vec<HVector> = (0..5).map(|_| random_vector(16, &mut r)).collect();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for s in S_VALUES {
        let p = FracParams::new(s).unwrap();
        let d = dtn(op.clone(), s, auto_mesh(&p, 0.1, 2048));
        let c = frac_constant(s).unwrap();
        let ms = spectral_frac_power(&m, s).unwrap() * c;
        let mut w = 0.0f64;
        for phi in &phis {
            let exact = &ms * phi;
            w = w.max(rel(&d.apply(phi).unwrap().lambda_s_phi, &exact));
        }
        detail.push(format!("s={s}: C={c:.6} max rel {w:.2e}"));
        worst = worst.max(w);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!((frac_constant(0.5).unwrap() - 1.0).abs() < 1e-12);
    let pass = worst <= 1e-3 && elapsed <= 60.0;
    report(
        1,
        pass,
        &format!("{}; {elapsed:.1} s (limit 1e-3, 60 s)", detail.join(", ")),
    );
    assert!(pass);
}

#[test]
fn square_property() {
    let m = spd_with_spectrum(8, 0.1, 10.0, 5);
    let p = FracParams::new(0.5).unwrap();
    let d = dtn(linear_op(&m), 0.5, auto_mesh(&p, 0.1, 2048));
    let mut r = rng(3);
    let mut lin_err = 0.0f64;
    for _ in 0..3 {
        let phi = random_vector(8, &mut r);
        let l1 = d.apply(&phi).unwrap().lambda_s_phi;
        let l2 = d.apply(&l1).unwrap().lambda_s_phi;
        let a0 = &m * &phi;
        lin_err = lin_err.max((&l2 - &a0).norm() / (1.0 + a0.norm()));
    }

    // for nonlinear A the square is the Yosida-difference limit, not a composition
    let op = plap8(3.0);
    let d = dtn(op.clone(), 0.5, graded_zmesh(1024, 20.0, 2.0).unwrap());
    let mut sq_err = 0.0f64;
    let mut comp_err = 0.0f64;
    for k in 0..2 {
        let phi = DVector::from_fn(8, |i, _| ((i + 1 + k) as f64 * 0.7).sin());
        let a0 = minimal_selection(op.as_ref(), &phi).unwrap();
        let sq = d.square(&phi, 2e-3).unwrap();
        sq_err = sq_err.max((&sq - &a0).norm() / (1.0 + a0.norm()));
        let l1 = d.apply(&phi).unwrap().lambda_s_phi;
        let l2 = d.apply(&l1).unwrap().lambda_s_phi;
        comp_err = comp_err.max((&l2 - &a0).norm() / (1.0 + a0.norm()));
    }
    let pass = lin_err <= 2e-2 && sq_err <= 2e-2;
    report(
        2,
        pass,
        &format!(
            "linear composition {lin_err:.2e}; p-Laplacian square {sq_err:.2e} \
             (plain composition would give {comp_err:.2e}); limit 2e-2"
        ),
    );
    assert!(pass);
    // composition is not the square for nonlinear A
    assert!(comp_err > 0.1);
}

/// `(∫₀^∞ t³ u(t)² dt)^{1/2}` for the scalar solution with `a = 1`, `φ = 1`.
fn flux_derivative_oracle(s: f64) -> f64 {
    let (t_max, n) = (60.0, 12_000);
    let h = t_max / n as f64;
    let f = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            t.powi(3) * bessel_scalar_extension(1.0, s, 1.0, t).unwrap().u.powi(2)
        }
    };
    let mut sum = f(0.0) + f(t_max);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (sum * h / 3.0).sqrt()
}

#[test]
fn estimate_ledger() {
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut eps_max = 0.0f64;
    let mut scalar_ratio_075 = None;
    for (name, d, phis) in instances(1024) {
        for phi in &phis {
            let (problem, sol) = dirichlet(&d, phi);
            let rep = audit_estimates(&sol, &problem).unwrap();
            assert!(rep.phi_in_domain, "{name}");
            eps_max = eps_max.max(rep.eps_disc);
            for c in &rep.checks {
                checks += 1;
                if !c.pass {
                    failures.push((name.clone(), d.params.s, c.clone()));
                }
            }
            if name == "scalar a=4 s=0.75" {
                let c = rep.get("t_flux_derivative_l2").unwrap();
                scalar_ratio_075 = Some(c.lhs / phi.norm());
            }
        }
    }
    let oracle = flux_derivative_oracle(0.75);
    let bound = t_flux_derivative_coefficient(0.75);
    let measured = scalar_ratio_075.unwrap();
    let pass = failures.is_empty() && eps_max <= 0.05;
    let mut detail = format!(
        "{} of {checks} checks pass, eps_disc max {eps_max:.2e}",
        checks - failures.len()
    );
    if !failures.is_empty() {
        let names: Vec<String> = failures
            .iter()
            .map(|(n, _, c)| format!("{n}: {} {:.4} > {:.4}", c.name, c.lhs, c.rhs))
            .collect();
        detail += &format!(
            "; violated: {}; Bessel oracle for the scalar case at s=0.75 gives {oracle:.4}·|φ| \
             against the bound {bound:.4}·|φ| (measured {measured:.4})",
            names.join("; ")
        );
    }
    report(3, pass, &detail);

    // the only violations are the second-derivative bound for s > 1/2, and
    // the exact solution violates it too
    assert!(eps_max <= 0.05);
    for (name, s, c) in &failures {
        assert!(
            c.name == "t_flux_derivative_l2" && *s > 0.5,
            "unexpected failure {name}: {c:?}"
        );
    }
    assert!(oracle > bound);
    assert!(
        (measured - oracle).abs() <= 1e-2 * oracle,
        "{measured} vs {oracle}"
    );
}

#[test]
fn contraction_along_extension() {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let mut all = true;
    for (name, d, _) in instances(512) {
        let dim = d.op.dim();
        let pairs = sample_pairs(dim, 20, &mut rng(31 + dim as u64));
        for (a, b) in &pairs {
            let (_, sa) = dirichlet(&d, a);
            let (_, sb) = dirichlet(&d, b);
            let c = contraction_check(&sa, &sb).unwrap();
            worst = worst.min(c.tolerance - c.max_increase);
            all &= c.pass;
            count += 1;
            assert!(c.pass, "{name}: {c:?}");
        }
    }
    report(
        4,
        all,
        &format!("{count} pairs, worst margin {worst:.2e} (tolerance 1e-8 + eps_disc)"),
    );
}

#[test]
fn cauchy_bound_of_regularized_path() {
    let m4 = spd_with_spectrum(4, 0.5, 4.0, 9);
    let cases: Vec<(&str, SharedOp, HVector)> = vec![
        ("scalar", scalar(3.0), one(1.2)),
        (
            "linear4",
            linear_op(&m4),
            DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]),
        ),
    ];
    let pairs = [(1e-2, 5e-3), (5e-3, 2.5e-3)];
    let mut worst = 0.0f64;
    let mut all = true;
    for (name, op, phi) in cases {
        for s in S_VALUES {
            let mesh = plap_mesh(s, 256);
            let rep = cauchy_bound_check(
                op.clone(),
                FracParams::new(s).unwrap(),
                mesh,
                &phi,
                0.1,
                &pairs,
            )
            .unwrap();
            for p in &rep.pairs {
                worst = worst.max(p.lhs / p.rhs);
                all &= p.pass;
                assert!(p.pass, "{name} s={s}: {p:?}");
            }
        }
    }
    report(5, all, &format!("largest LHS/RHS {worst:.3e} (limit 1)"));
}

#[test]
fn complete_accretivity() {
    let op = plap8(3.0);
    let d = dtn(op, 0.5, plap_mesh(0.5, 256));
    let pairs = sample_pairs(8, 200, &mut rng(6));
    let j_set = NormalContraction::standard_set();

    let images: Vec<(HVector, HVector)> = pairs
        .iter()
        .map(|(a, b)| (d.resolve(1.0, a).unwrap(), d.resolve(1.0, b).unwrap()))
        .collect();
    let res = check_complete_contraction(&pairs, &images, &j_set, 1e-8).unwrap();

    let flow = |u: &HVector| evolve(&d, u, 0.5, 2, None).unwrap().states[2].clone();
    let flow_pairs = &pairs[..50];
    let flow_images: Vec<(HVector, HVector)> =
        flow_pairs.iter().map(|(a, b)| (flow(a), flow(b))).collect();
    let sg = check_complete_contraction(flow_pairs, &flow_images, &j_set, 1e-8).unwrap();

    let worst = res.worst_margin().min(sg.worst_margin());
    let pass = res.pass() && sg.pass() && worst >= -1e-8;
    report(
        6,
        pass,
        &format!(
            "resolvent: {} pairs, worst margin {:.2e}; semigroup steps: {} pairs, worst margin {:.2e}",
            res.instances,
            res.worst_margin(),
            sg.instances,
            sg.worst_margin()
        ),
    );
    assert!(pass);
}

#[test]
fn semigroup_convergence() {
    let p = FracParams::new(0.5).unwrap();
    let d = dtn(scalar(4.0), 0.5, auto_mesh(&p, 4.0, 1024));
    let exact = (-2.0f64).exp();
    let errs: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&m| (evolve(&d, &one(1.0), 1.0, m, None).unwrap().states[m][0] - exact).abs())
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let halves = ratios.iter().all(|r| (1.5..=2.5).contains(r));

    let m8 = spd_with_spectrum(8, 0.1, 10.0, 17);
    let d8 = dtn(linear_op(&m8), 0.5, auto_mesh(&p, 0.1, 1024));
    let phi = random_vector(8, &mut rng(4));
    let eig = m8.clone().symmetric_eigen();
    let c = frac_constant(0.5).unwrap();
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-c * l.sqrt()).exp()));
    let target = &eig.eigenvectors * decay * eig.eigenvectors.transpose() * &phi;
    let lin_err = rel(
        &evolve(&d8, &phi, 1.0, 256, None).unwrap().states[256],
        &target,
    );

    let pass = halves && lin_err <= 2e-2;
    let e: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    let r: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    report(
        7,
        pass,
        &format!(
            "scalar errors {} (ratios {}); linear 8x8 at m=256 rel {lin_err:.2e} (limit 2e-2)",
            e.join(", "),
            r.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn solver_cross_validation() {
    let mut worst = 0.0f64;
    for (s, n) in [(0.25, 8), (0.5, 10), (0.75, 12)] {
        let params = FracParams::new(s).unwrap();
        let cases: Vec<(SharedOp, HVector)> = vec![
            (scalar(3.0), one(1.3)),
            (plap2(3.0), DVector::from_vec(vec![2.0, 0.0])),
        ];
        for (op, phi) in cases {
            let mesh = graded_zmesh(n, 6.0, 2.0).unwrap();
            let problem = ExtensionProblem::new(
                op.clone(),
                params,
                mesh.clone(),
                Boundary::Dirichlet(phi.clone()),
                SolverConfig::default(),
            )
            .unwrap();
            let a = solve(&problem).unwrap();
            let b = solve(&ExtensionProblem {
                cfg: SolverConfig::default().with_method(Method::RegularizedPath),
                ..problem.clone()
            })
            .unwrap();
            let c = brute_force_bvp(op.as_ref(), params, &phi, &mesh).unwrap();
            assert!(a.converged && b.converged);
            for d in [
                a.v.max_dist(&b.v).unwrap(),
                a.v.max_dist(&c.v).unwrap(),
                b.v.max_dist(&c.v).unwrap(),
            ] {
                worst = worst.max(d);
            }
        }
    }
    let pass = worst <= 1e-6;
    report(
        8,
        pass,
        &format!("largest pairwise distance {worst:.2e} (limit 1e-6)"),
    );
    assert!(pass);
}

/// Largest drop between consecutive slopes of `f` on `x`, relative to the largest slope.
fn convexity_violation(x: &[f64], f: &[f64]) -> f64 {
    let slopes: Vec<f64> = x
        .windows(2)
        .zip(f.windows(2))
        .map(|(x, f)| (f[1] - f[0]) / (x[1] - x[0]))
        .collect();
    let scale = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    slopes
        .windows(2)
        .map(|w| (w[0] - w[1]) / scale)
        .fold(0.0, f64::max)
}

#[test]
fn robin_resolvent() {
    let mut worst_identity = 0.0f64;
    let mut worst_decrease = 0.0f64;
    let mut t_convex_low = 0.0f64;
    let mut t_convex_high = 0.0f64;
    let mut z_convex = 0.0f64;
    let mut eps_max = 0.0f64;
    let tol = SolverConfig::default().tol;
    for (name, d, phis) in instances(512) {
        for lambda in [0.5, 2.0] {
            for phi in &phis {
                let sol = d.resolve_from(lambda, phi, None).unwrap();
                let u = &sol.trace_v0;
                let res = d.resolvent_identity_residual(lambda, phi, u).unwrap();
                worst_identity = worst_identity.max(res / (5.0 * tol * (1.0 + phi.norm())));
                assert!(res <= 5.0 * tol * (1.0 + phi.norm()), "{name}: {res}");

                let sq: Vec<f64> = sol.v.values().iter().map(|v| v.norm_squared()).collect();
                let eps = sol.eps_disc;
                eps_max = eps_max.max(eps);
                let inc = sq.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) / sq[0];
                worst_decrease = worst_decrease.max(inc / eps);
                z_convex = z_convex.max(convexity_violation(sol.v.nodes(), &sq) / eps);
                let t = d.mesh.t_nodes(&d.params);
                let tv = convexity_violation(&t, &sq) / eps;
                if d.params.s <= 0.5 {
                    t_convex_low = t_convex_low.max(tv);
                } else {
                    t_convex_high = t_convex_high.max(tv);
                }
            }
        }
    }
    // exact scalar solution at s = 3/4: ‖u(t)‖² = 1 − c t^{3/2} + … is concave at the origin
    let u2 = |t: f64| {
        bessel_scalar_extension(1.0, 0.75, 1.0, t)
            .unwrap()
            .u
            .powi(2)
    };
    let exact_second_diff = u2(1e-2) - 2.0 * u2(2e-2) + u2(3e-2);
    let pass = worst_identity <= 1.0
        && worst_decrease <= 1.0
        && z_convex <= 1.0
        && t_convex_low <= 1.0
        && t_convex_high <= 1.0;
    let mut detail = format!(
        "identity residual at most {worst_identity:.2e} of its tolerance; \
         in units of eps_disc (max {eps_max:.2e}): increase {worst_decrease:.2e}, \
         convexity defect in z {z_convex:.2e}, in t for s<=1/2 {t_convex_low:.2e}, \
         in t for s=3/4 {t_convex_high:.2e}"
    );
    if t_convex_high > 1.0 {
        detail += &format!(
            "; the exact scalar solution at s=3/4 is concave in t near 0 \
             (second difference {exact_second_diff:.3e} at t=0.01,0.02,0.03)"
        );
    }
    report(9, pass, &detail);
    assert!(worst_identity <= 1.0 && worst_decrease <= 1.0 && z_convex <= 1.0);
    assert!(t_convex_low <= 1.0);
    // any failure in t for s > 1/2 is shared by the exact solution
    assert!(t_convex_high <= 1.0 || exact_second_diff < 0.0);
}
