//! Property tests for the homogeneity-driven identities.

use std::collections::BTreeMap;

use approx::assert_relative_eq;
use proptest::prelude::*;

use lmlab::lagrangian::{Domain, LagrangianSpec, BEEM3_DSL};
use lmlab::legendre::LegendreSolver;
use lmlab::metric::{euler_residuals, gradient_l, metric_at};

fn beem3() -> LagrangianSpec {
    LagrangianSpec::beem3(0.05).unwrap()
}

fn odd() -> LagrangianSpec {
    lmlab::catalogue::get("odd_perturbed").unwrap().spec().unwrap().clone()
}

// directions bounded away from the coordinate axes, where the bump is smooth
fn direction() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3).prop_filter("away from axes", |v| {
        let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
        v[0].abs() > 0.05 && r > 0.05
    })
}

fn timelike() -> impl Strategy<Value = Vec<f64>> {
    (0.3f64..2.0, -0.6f64..0.6, -0.6f64..0.6, prop::bool::ANY)
        .prop_map(|(t, x, y, past)| vec![if past { -t } else { t }, x * t, y * t])
        .prop_filter("off axis", |v| v[1].abs() + v[2].abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_is_two_homogeneous(v in direction(), lambda in 0.1f64..10.0) {
        for spec in [beem3(), odd()] {
            let a = spec.eval_f64(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
            let b = spec.eval_f64(&scaled).unwrap();
            assert_relative_eq!(b, lambda * lambda * a, epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn metric_is_zero_homogeneous(v in direction(), lambda in 0.1f64..10.0) {
        let spec = beem3();
        let g = metric_at(&spec, &v).unwrap().matrix;
        let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
        let h = metric_at(&spec, &scaled).unwrap().matrix;
        prop_assert!((g - h).amax() < 1e-9);
    }

    #[test]
    fn euler_identities_hold(v in direction()) {
        for spec in [beem3(), odd()] {
            let r = euler_residuals(&spec, &v).unwrap();
            prop_assert!(r.gradient < 1e-10, "{r:?}");
            prop_assert!(r.contracted_index < 1e-6, "{r:?}");
            prop_assert!(r.contracted_derivative < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn gradient_is_metric_times_vector(v in direction()) {
        let spec = odd();
        let g = metric_at(&spec, &v).unwrap();
        let grad = gradient_l(&spec, &v).unwrap();
        for i in 0..3 {
            let gv: f64 = (0..3).map(|j| g.matrix[(i, j)] * v[j]).sum();
            assert_relative_eq!(grad[i], gv, epsilon = 1e-12, max_relative = 1e-10);
        }
        // L = g_v(v, v) / 2
        assert_relative_eq!(spec.eval_f64(&v).unwrap(), 0.5 * g.apply(&v, &v), epsilon = 1e-12, max_relative = 1e-10);
    }

    #[test]
    fn legendre_round_trip(v in timelike()) {
        for spec in [beem3(), odd()] {
            let solver = LegendreSolver::new(&spec).unwrap();
            let p = solver.legendre(&v).unwrap();
            let back = solver.inverse(&p, None).unwrap();
            let err: f64 = back.v.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(err < 1e-8 * n, "{v:?} -> {:?}", back.v);
        }
    }

    #[test]
    fn hamiltonian_is_the_pulled_back_lagrangian(v in timelike(), lambda in 0.2f64..5.0) {
        let spec = beem3();
        let solver = LegendreSolver::new(&spec).unwrap();
        let p = solver.legendre(&v).unwrap();
        let h = solver.hamiltonian(&p).unwrap();
        assert_relative_eq!(h, spec.eval_f64(&v).unwrap(), max_relative = 1e-9);
        let scaled: Vec<f64> = p.iter().map(|x| lambda * x).collect();
        let hs = solver.hamiltonian(&scaled).unwrap();
        assert_relative_eq!(hs, lambda * lambda * h, max_relative = 1e-9);
    }

    #[test]
    fn dsl_and_builtin_agree(v in direction(), alpha in 0.0f64..3.0) {
        let builtin = LagrangianSpec::beem3(alpha).unwrap();
        let params = BTreeMap::from([("alpha".to_string(), alpha)]);
        let dsl = LagrangianSpec::from_dsl("beem3", BEEM3_DSL, 3, &params, Domain::AllNonzero).unwrap();
        assert_relative_eq!(dsl.eval_f64(&v).unwrap(), builtin.eval_f64(&v).unwrap(), epsilon = 1e-13, max_relative = 1e-12);
        let a = metric_at(&dsl, &v).unwrap().matrix;
        let b = metric_at(&builtin, &v).unwrap().matrix;
        prop_assert!((a - b).amax() < 1e-10);
    }
}
