mod common;

use std::path::Path;
use std::sync::Arc;

use common::*;
use fracpow::cli::config::{read_vector_csv, write_vector_csv};
use fracpow::cli::RunConfig;
use fracpow::hilbert::HVector;
use fracpow::mesh::FracParams;
use fracpow::monops::{make_box, make_power_prox, make_scalar, resolve, MonotoneOp};
use fracpow::verify::frac_constant;
use nalgebra::DVector;
use proptest::prelude::*;

fn vec_strategy(n: usize) -> impl Strategy<Value = HVector> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolvents_are_firmly_nonexpansive(
        a in vec_strategy(4),
        b in vec_strategy(4),
        mu in 0.01f64..10.0,
        q in 1.2f64..4.0,
    ) {
        let ops: Vec<Box<dyn MonotoneOp>> = vec![
            Box::new(make_box(4, -0.5, 1.0).unwrap()),
            Box::new(make_power_prox(4, 1.5, q).unwrap()),
            Box::new(make_scalar(4, 2.0).unwrap()),
        ];
        for op in &ops {
            let ja = resolve(op.as_ref(), mu, &a).unwrap();
            let jb = resolve(op.as_ref(), mu, &b).unwrap();
            let d = &ja - &jb;
            // ‖Ja − Jb‖² ≤ ⟨Ja − Jb, a − b⟩
            prop_assert!(d.norm_squared() <= d.dot(&(&a - &b)) + 1e-9 * (1.0 + d.norm()));
        }
    }

    #[test]
    fn frac_params_round_trip(s in 0.02f64..0.98, t in 0.0f64..20.0) {
        let p = FracParams::new(s).unwrap();
        let z = p.z_of_t(t).unwrap();
        prop_assert!((p.t_of_z(z).unwrap() - t).abs() <= 1e-10 * (1.0 + t));
    }

    #[test]
    fn config_accepts_every_exponent(s in 0.01f64..0.99, seed in 0u64..i64::MAX as u64) {
        let text = format!(
            "seed = {seed}\n[operator]\nkind = \"scalar\"\na = 1\n[frac]\ns = {s:?}\n"
        );
        let cfg = RunConfig::parse(&text, Path::new("."), "p").unwrap();
        prop_assert_eq!(cfg.s_values, vec![s]);
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn vector_csv_round_trip(v in vec_strategy(7)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        write_vector_csv(&path, "phi", &v).unwrap();
        prop_assert_eq!(read_vector_csv(&path).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scalar_dtn_is_the_scaled_fractional_power(
        a in 0.1f64..20.0,
        s in 0.1f64..0.9,
        phi in -5.0f64..5.0,
    ) {
        prop_assume!(phi.abs() > 1e-3);
        let p = FracParams::new(s).unwrap();
        let d = dtn(Arc::new(make_scalar(1, a).unwrap()), s, auto_mesh(&p, a, 512));
        let got = d.apply(&DVector::from_element(1, phi)).unwrap().lambda_s_phi[0];
        let exact = frac_constant(s).unwrap() * a.powf(s) * phi;
        prop_assert!((got - exact).abs() < 1e-3 * exact.abs(), "{got} vs {exact}");
    }

    #[test]
    fn dtn_is_monotone_on_plap(a in vec_strategy(8), b in vec_strategy(8)) {
        let d = dtn(plap8(3.0), 0.5, fracpow::mesh::graded_zmesh(128, 12.0, 2.0).unwrap());
        let la = d.apply(&a).unwrap().lambda_s_phi;
        let lb = d.apply(&b).unwrap().lambda_s_phi;
        prop_assert!((la - lb).dot(&(&a - &b)) >= -1e-6 * (&a - &b).norm_squared());
    }
}
