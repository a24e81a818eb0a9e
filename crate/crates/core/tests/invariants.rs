//! Property tests of structural invariants.

use hypoflow::config::{ExperimentConfig, ExperimentName};
use hypoflow::fit::exponential_rate;
use hypoflow::green::green_mass;
use hypoflow::linalg::CVec;
use hypoflow::model::{Model, ModelSpec, Moments};
use hypoflow::modes::{certify, propagator};
use hypoflow::operators::Discretization;
use num_complex::Complex64;
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn moments() -> impl Strategy<Value = Moments> {
    (0.2f64..3.0, 1.0f64..3.0, 0.2f64..3.0, 0.1f64..3.0, 0.1f64..2.0)
        .prop_map(|(theta_big, k_ratio, theta, kappa, lambda_m)| {
            Moments::new(theta_big, k_ratio * theta_big * theta_big, theta, kappa, lambda_m, 0.5).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mu_is_bounded_by_lambda_and_monotone(m in moments(), x in 0.0f64..50.0, dx in 0.0f64..5.0) {
        let c = certify(&m, &[x]).unwrap();
        let c2 = certify(&m, &[x + dx]).unwrap();
        prop_assert!(c.mu <= c.big_lambda);
        prop_assert!(c.mu <= c2.mu * (1.0 + 1e-14));
        prop_assert!(c.lambda >= c.mu * (1.0 - 1e-12));
        prop_assert!(c.delta > 0.0 && c.delta <= 0.5);
    }

    #[test]
    fn propagator_is_a_contraction(case in 0usize..2, xi in -8.0f64..8.0, t in 0.01f64..5.0, c in coeffs(20)) {
        let spec = if case == 0 { ModelSpec::fokker_planck(1) } else { ModelSpec::bgk(1) };
        let disc = Discretization::default_for(Model::new(spec).unwrap(), 20).unwrap();
        let out = &propagator(&disc.generator(&[xi]), t) * &c;
        prop_assert!(out.norm() <= c.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn zero_mode_conserves_mass(case in 0usize..2, t in 0.01f64..20.0, c in coeffs(20)) {
        let spec = if case == 0 { ModelSpec::fokker_planck(1) } else { ModelSpec::bgk(1) };
        let disc = Discretization::default_for(Model::new(spec).unwrap(), 20).unwrap();
        let e = disc.equilibrium();
        let out = &propagator(&disc.generator(&[0.0]), t) * &c;
        prop_assert!((e.dotc(&out) - e.dotc(&c)).norm() <= 1e-12 * (1.0 + c.norm()));
    }

    #[test]
    fn green_kernel_has_unit_mass(t in 0.02f64..8.0) {
        prop_assert!((green_mass(t).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_planted_rates(rate in 0.01f64..5.0, amp in 1e-3f64..1e3) {
        let t: Vec<f64> = (0..64).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| amp * (-rate * t).exp()).collect();
        let f = exponential_rate(&t, &v, (1.0, 6.0)).unwrap();
        prop_assert!((f.value - rate).abs() < 1e-9 * (1.0 + rate));
    }

    #[test]
    fn config_round_trips_through_toml(seed in any::<u64>(), d in 1usize..=2, n in 8usize..100) {
        let mut cfg = ExperimentConfig::new(ExperimentName::Wholespace);
        cfg.seed = seed;
        cfg.model.d = d;
        cfg.basis.n = n;
        cfg.scaling.weight_order = 3.0;
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }
}
