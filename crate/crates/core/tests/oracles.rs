//! Derived values checked against independent computations.

use hypoflow::field::{moment_ledger_evolution, SeparableDatum};
use hypoflow::green::{solve_exact, PhaseGrid};
use hypoflow::macroscopic::macro_constants;
use hypoflow::model::{Model, ModelSpec, Weight};
use hypoflow::modes::{big_lambda, mode_decay_check, propagator};
use hypoflow::operators::Discretization;
use num_complex::Complex64;
use std::f64::consts::PI;

fn disc(spec: ModelSpec, n: usize) -> Discretization {
    Discretization::default_for(Model::new(spec).unwrap(), n).unwrap()
}

/// `⅓ min{1,Θ} min{1, λ_mΘ²/(K+Θκ²)}` in exact rationals `(num, den)`.
fn lambda_rational(theta: i64, k: i64, kappa: i64, lambda_m: i64) -> (i64, i64) {
    assert_eq!(theta, 1);
    let (n, d) = (lambda_m * theta * theta, k + theta * kappa * kappa);
    if n >= d { (1, 3) } else { (n, 3 * d) }
}

#[test]
fn certificate_matches_rational_arithmetic() {
    for (spec, kappa) in [(ModelSpec::fokker_planck(1), 1), (ModelSpec::bgk(1), 2)] {
        let m = Model::new(spec).unwrap().moments;
        let (n, d) = lambda_rational(1, 3, kappa, 1);
        let want = n as f64 / d as f64;
        assert!((big_lambda(&m) - want).abs() <= 4.0 * f64::EPSILON * want);
    }
}

#[test]
fn macro_constants_match_fractions() {
    let fp = macro_constants(&Model::new(ModelSpec::fokker_planck(1)).unwrap().moments);
    assert!((fp.b - 2.5).abs() < 1e-14);
    assert!((fp.delta - 4.0 / 55.0).abs() < 1e-15);
    let bgk = macro_constants(&Model::new(ModelSpec::bgk(1)).unwrap().moments);
    assert!((bgk.b - 3.5).abs() < 1e-14);
    assert!((bgk.delta - 4.0 / 103.0).abs() < 1e-15);
    assert_eq!(bgk.a, bgk.delta / 4.0);
}

#[test]
fn equilibrium_mode_at_zero_frequency_is_flat() {
    for spec in [ModelSpec::fokker_planck(1), ModelSpec::bgk(1)] {
        let d = disc(spec, 24);
        let r = mode_decay_check(&d, &[0.0], &d.equilibrium(), 10.0, 50, &Weight::InverseEquilibrium).unwrap();
        assert!(r.violations.is_empty());
        let v = r.series("gamma_inf").unwrap();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-13));
    }
}

fn second_moments(g: &PhaseGrid) -> [f64; 3] {
    let h = g.x[1] - g.x[0];
    let mut m = [0.0; 3];
    for (i, x) in g.x.iter().enumerate() {
        for (j, v) in g.v.iter().enumerate() {
            let f = g.at(i, j) * h * h;
            m[0] += x * x * f;
            m[1] += x * v * f;
            m[2] += v * v * f;
        }
    }
    m
}

/// `(⟨x²⟩, ⟨xv⟩, ⟨v²⟩)' = (2⟨xv⟩, ⟨v²⟩ − ⟨xv⟩, 2 − 2⟨v²⟩)` by RK4.
fn moment_ode(m0: [f64; 3], t: f64) -> [f64; 3] {
    let rhs = |m: [f64; 3]| [2.0 * m[1], m[2] - m[1], 2.0 - 2.0 * m[2]];
    let steps = 4000;
    let h = t / steps as f64;
    let mut m = m0;
    for _ in 0..steps {
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = rhs(m);
        let k2 = rhs(add(m, k1, h / 2.0));
        let k3 = rhs(add(m, k2, h / 2.0));
        let k4 = rhs(add(m, k3, h));
        m = [0, 1, 2].map(|i| m[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    m
}

#[test]
fn exact_solution_moments_follow_the_moment_ode() {
    let f0 = PhaseGrid::from_fn(20.0, 256, |x, v| (-0.5 * (x * x / 2.0 + v * v / 0.5)).exp() / (2.0 * PI));
    let m0 = second_moments(&f0);
    for t in [0.3, 1.0, 2.5] {
        let got = second_moments(&solve_exact(&f0, t).unwrap());
        let want = moment_ode(m0, t);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-8 * (1.0 + want[k].abs()), "t={t} k={k}: {} vs {}", got[k], want[k]);
        }
    }
}

#[test]
fn ledger_mass_of_gaussian_datum_is_constant() {
    // ∫∫ f dx dv is conserved; the ledger's (0,0) scalar moment must stay at ∫φ = 1.
    let d = disc(ModelSpec::bgk(1), 16);
    let l = moment_ledger_evolution(&d, &SeparableDatum::gaussian(1), 0, 5.0, 6).unwrap();
    let mass = &l.scalar[0].values;
    assert!(mass.iter().all(|m| (m - 1.0).abs() < 1e-12), "{mass:?}");
}

#[test]
fn fokker_planck_density_matches_langevin_characteristic() {
    // For f₀ = M the position variance of the Langevin process gives ρ̂(t) = exp(−ξ²(t − 1 + e^{−t})).
    let d = disc(ModelSpec::fokker_planck(1), 64);
    let e = d.equilibrium();
    for xi in [0.5, 1.0, 2.0] {
        let g = d.generator(&[xi]);
        for t in [0.5, 2.0, 5.0] {
            let c = &propagator(&g, t) * &e;
            let rho = e.dotc(&c);
            let want = (-xi * xi * (t - 1.0 + (-t).exp())).exp();
            assert!((rho - Complex64::new(want, 0.0)).norm() < 1e-12, "xi={xi} t={t}: {rho} vs {want}");
        }
    }
}
