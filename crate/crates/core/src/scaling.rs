//! Semigroup factorization checks (Duhamel enlargement and shrinking),
//! decay in polynomially weighted spaces, and the parabolic-scaling ladder.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::VelocityBasis;
use crate::error::{Error, Result};
use crate::fit::{self, Fit};
use crate::linalg::{expm, max_abs_diff, to_complex, CMat, CVec};
use crate::model::{CollisionCase, Model, Weight};
use crate::modes::{self, propagator, weighted_norm_squared};
use crate::operators::{scattering_gain, Discretization};
use crate::quadrature::{GaussHermite, GaussLegendre};

/// Smooth cutoff with `χ = 1` on `[0, 1]`, `χ = 0` on `[2, ∞)`.
pub fn cutoff(r: f64) -> f64 {
    let s = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let x = 2.0 - r;
    s(x) / (s(x) + s(1.0 - x))
}

/// `𝔄 + 𝔅 = L − T(ξ)`.
#[derive(Debug, Clone)]
pub struct OperatorSplit {
    pub case: CollisionCase,
    pub xi: Vec<f64>,
    pub a: CMat,
    pub b: CMat,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitParameters {
    /// Multiplier `N` of the cutoff in Case (a).
    pub strength: f64,
    /// Radius `R` of the cutoff in Case (a).
    pub radius: f64,
}

impl Default for SplitParameters {
    fn default() -> Self {
        Self { strength: 10.0, radius: 4.0 }
    }
}

/// Multiplication by `χ(|v|/R)` in basis coordinates.
fn cutoff_matrix(basis: &VelocityBasis, radius: f64) -> DMatrix<f64> {
    let chi = |v: &[f64]| cutoff(v.iter().map(|x| x * x).sum::<f64>().sqrt() / radius);
    if !basis.is_hermite() {
        return DMatrix::from_diagonal(&DVector::from_iterator(basis.size(), basis.nodes.iter().map(|v| chi(v))));
    }
    let per = basis.shape[0];
    let rule = GaussHermite::new(2 * per + 60);
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
    for _ in 0..basis.d {
        pts = pts
            .iter()
            .flat_map(|(p, pw)| {
                rule.nodes.iter().zip(&rule.weights).map(move |(x, w)| {
                    let mut q = p.clone();
                    q.push(*x);
                    (q, pw * w)
                })
            })
            .collect();
    }
    let n = basis.size();
    let h = DMatrix::from_fn(n, pts.len(), |k, a| {
        basis
            .multi_index(k)
            .iter()
            .enumerate()
            .map(|(j, &i)| crate::quadrature::hermite_orthonormal(i + 1, pts[a].0[j])[i])
            .product::<f64>()
    });
    let hw = DMatrix::from_fn(n, pts.len(), |k, a| h[(k, a)] * pts[a].1 * chi(&pts[a].0));
    hw * h.transpose()
}

/// Case (a): `𝔄 = N χ_R`; Case (b): `𝔄` = gain. `𝔅 = (L − T) − 𝔄` in both.
pub fn operator_split(disc: &Discretization, xi: &[f64], params: &SplitParameters) -> Result<OperatorSplit> {
    let case = disc.model.spec.case;
    let a = match case {
        CollisionCase::Scattering => to_complex(&scattering_gain(&disc.model.spec, &disc.basis)?),
        CollisionCase::FokkerPlanck => to_complex(&(cutoff_matrix(&disc.basis, params.radius) * params.strength)),
    };
    let b = disc.generator(xi) - &a;
    Ok(OperatorSplit { case, xi: xi.to_vec(), a, b })
}

impl OperatorSplit {
    /// Largest eigenvalue of the Hermitian part of `𝔅`.
    pub fn dissipativity(&self) -> f64 {
        let h = (&self.b + self.b.adjoint()) * Complex64::new(0.5, 0.0);
        // Hermitian `h = X + iY` has the real symmetric embedding [[X, −Y], [Y, X]].
        let n = h.nrows();
        let emb = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = h[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        emb.symmetric_eigenvalues().max()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DuhamelReport {
    pub t: f64,
    pub order: usize,
    pub panels: usize,
    /// `max|e^{(𝔄+𝔅)t} − e^{𝔅t} − ∫ e^{(𝔄+𝔅)s} 𝔄 e^{𝔅(t−s)} ds|`.
    pub enlargement: f64,
    /// `max|e^{(𝔄+𝔅)t} − e^{𝔅t} − ∫ e^{𝔅(t−s)} 𝔄 e^{(𝔄+𝔅)s} ds|`.
    pub shrinking: f64,
    /// Both residuals with the order doubled.
    pub enlargement_doubled: f64,
    pub shrinking_doubled: f64,
}

/// Residuals of both Duhamel forms with `panels` panels of `order` nodes.
pub fn duhamel_residuals(split: &OperatorSplit, t: f64, order: usize, panels: usize) -> (f64, f64) {
    let n = split.a.nrows();
    let full = &split.a + &split.b;
    let target = expm(&(&full * Complex64::new(t, 0.0))) - expm(&(&split.b * Complex64::new(t, 0.0)));
    if t == 0.0 {
        return (max_abs_diff(&target, &CMat::zeros(n, n)), max_abs_diff(&target, &CMat::zeros(n, n)));
    }
    let nodes = GaussLegendre::new(order).composite(0.0, t, panels);
    let terms: Vec<(CMat, CMat)> = nodes
        .par_iter()
        .map(|&(s, w)| {
            let es = expm(&(&full * Complex64::new(s, 0.0)));
            let eb = expm(&(&split.b * Complex64::new(t - s, 0.0)));
            let weight = Complex64::new(w, 0.0);
            ((&es * &split.a * &eb) * weight, (&eb * &split.a * &es) * weight)
        })
        .collect();
    let mut enl = CMat::zeros(n, n);
    let mut shr = CMat::zeros(n, n);
    for (e, s) in terms {
        enl += e;
        shr += s;
    }
    (max_abs_diff(&target, &enl), max_abs_diff(&target, &shr))
}

/// Duhamel identities with `order`-point Gauss–Legendre quadrature in `s`,
/// cross-checked at twice the order.
pub fn duhamel_identity_check(split: &OperatorSplit, t: f64, order: usize) -> Result<DuhamelReport> {
    if t < 0.0 {
        return Err(Error::NonPositive(format!("Duhamel time t = {t}")));
    }
    let panels = 1;
    let (enlargement, shrinking) = duhamel_residuals(split, t, order, panels);
    let (enlargement_doubled, shrinking_doubled) = duhamel_residuals(split, t, 2 * order, panels);
    let worst = enlargement.max(shrinking);
    let worst_doubled = enlargement_doubled.max(shrinking_doubled);
    if worst > 1e-8 && worst_doubled > 1e-8 && worst_doubled > 0.1 * worst {
        return Err(Error::Quadrature {
            what: format!("Duhamel integral at t = {t}"),
            change: worst_doubled / worst,
        });
    }
    Ok(DuhamelReport { t, order, panels, enlargement, shrinking, enlargement_doubled, shrinking_doubled })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedDecay {
    pub weight: String,
    pub xi: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: Option<Fit>,
    pub mu: f64,
    /// Relative change of the fitted rate when `V_max` grows by 25%.
    pub tail_sensitivity: f64,
    pub passed: bool,
}

fn weighted_series(
    model: &Model,
    v_max: f64,
    spacing: f64,
    xi: &[f64],
    datum: &dyn Fn(&[f64]) -> f64,
    weight: &Weight,
    horizon: f64,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = (2.0 * v_max / spacing).round() as usize + 1;
    let basis = VelocityBasis::grid(&model.spec, &model.equilibrium, v_max, n)?;
    let disc = Discretization::new(model.clone(), basis)?;
    let c0: CVec = disc.basis.project(datum, &model.equilibrium).map(|x| Complex64::new(x, 0.0));
    let gram = disc.basis.weight_gram(weight, &model.equilibrium);
    let times = modes::uniform_times(horizon, samples);
    let step = propagator(&disc.generator(xi), times[1]);
    let mut c = c0;
    let mut values = Vec::with_capacity(samples);
    for k in 0..samples {
        if k > 0 {
            c = &step * &c;
        }
        values.push(weighted_norm_squared(&c, &gram));
    }
    Ok((times, values))
}

/// Fitted squared-norm rate in `L²(dγ_k)` on a grid basis for a datum with an
/// algebraic tail; passes iff the rate reaches `0.95 μ_ξ`.
pub fn weighted_decay_rate(
    model: &Model,
    weight: &Weight,
    xi: &[f64],
    datum: impl Fn(&[f64]) -> f64 + Sync,
    v_max: f64,
    points: usize,
    horizon: f64,
    samples: usize,
) -> Result<WeightedDecay> {
    weight.validate(model.d())?;
    if model.d() != 1 {
        return Err(Error::Dimension { expected: 1, got: model.d() });
    }
    if matches!(weight, Weight::InverseEquilibrium) {
        return Err(Error::InvalidModel("weighted decay needs a finite weight order".into()));
    }
    let spacing = 2.0 * v_max / (points - 1) as f64;
    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = [v_max, 1.25 * v_max]
        .par_iter()
        .map(|&vm| weighted_series(model, vm, spacing, xi, &datum, weight, horizon, samples))
        .collect();
    let mut runs = runs.into_iter();
    let (times, values) = runs.next().unwrap()?;
    let (_, wide) = runs.next().unwrap()?;
    let t_end = fit::decay_horizon(&times, &values, 1e-8);
    let window = (0.5 * t_end, t_end);
    let fit = fit::exponential_rate(&times, &values, window);
    let fit_wide = fit::exponential_rate(&times, &wide, window);
    let rate = fit.map_or(f64::NAN, |f| f.value);
    let tail_sensitivity = fit_wide.map_or(f64::INFINITY, |f| ((f.value - rate) / rate).abs());
    if tail_sensitivity > 0.02 {
        return Err(Error::Resolution(format!(
            "weighted rate changes by {:.1}% when V_max grows; widen the grid",
            100.0 * tail_sensitivity
        )));
    }
    let xi_norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mu = modes::mu(&model.moments, xi_norm);
    Ok(WeightedDecay {
        weight: weight.label(),
        xi: xi.to_vec(),
        times,
        values,
        fit,
        mu,
        tail_sensitivity,
        passed: rate >= 0.95 * mu,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingConfig {
    pub epsilons: Vec<f64>,
    pub xi: Vec<f64>,
    /// Macroscopic-time horizon.
    pub horizon: f64,
    pub samples: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { epsilons: vec![1.0, 0.5, 0.25, 0.125], xi: vec![1.0], horizon: 20.0, samples: 401 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub epsilon: f64,
    pub rate: f64,
    pub fit: Option<Fit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    pub rows: Vec<LadderRow>,
    /// `(max − min)/min` of the fitted rates.
    pub spread: f64,
    /// Squared-norm heat rate `2Θ|ξ|²`.
    pub heat_rate: f64,
    /// Relative distance of the smallest-`ε` rate to `heat_rate`.
    pub heat_deviation: f64,
    pub passed: bool,
}

/// Squared-norm decay rates of the datum `M` under `(L − iε v·ξ)/ε²`.
pub fn diffusion_ladder(disc: &Discretization, cfg: &ScalingConfig) -> Result<LadderReport> {
    if cfg.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidModel("ε must lie in (0, 1]".into()));
    }
    let l = to_complex(&disc.collision);
    let c0 = disc.equilibrium();
    let rows: Vec<Result<LadderRow>> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            let transport = disc.generator(&cfg.xi) - &l;
            let g = (&l + transport * Complex64::new(eps, 0.0)) * Complex64::new(1.0 / (eps * eps), 0.0);
            let times = modes::uniform_times(cfg.horizon, cfg.samples);
            let step = propagator(&g, times[1]);
            let mut c = c0.clone();
            let mut values = Vec::with_capacity(cfg.samples);
            for k in 0..cfg.samples {
                if k > 0 {
                    c = &step * &c;
                }
                values.push(c.norm_squared());
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Unstable(format!("scaled mode at ε = {eps}")));
            }
            let t_end = fit::decay_horizon(&times, &values, 1e-8);
            let fit = fit::exponential_rate(&times, &values, (0.5 * t_end, t_end));
            Ok(LadderRow { epsilon: eps, rate: fit.map_or(f64::NAN, |f| f.value), fit })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max = rows.iter().map(|r| r.rate).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min);
    let spread = (max - min) / min;
    let xi_sq: f64 = cfg.xi.iter().map(|x| x * x).sum();
    let heat_rate = 2.0 * disc.model.moments.theta_big * xi_sq;
    let smallest = rows.iter().min_by(|a, b| a.epsilon.total_cmp(&b.epsilon)).map_or(f64::NAN, |r| r.rate);
    Ok(LadderReport {
        rows,
        spread,
        heat_rate,
        heat_deviation: ((smallest - heat_rate) / heat_rate).abs(),
        passed: spread <= 0.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn bgk() -> Discretization {
        Discretization::default_for(Model::new(ModelSpec::bgk(1)).unwrap(), 32).unwrap()
    }

    #[test]
    fn cutoff_is_a_smooth_bump() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn split_sums_to_generator() {
        let disc = bgk();
        let s = operator_split(&disc, &[1.0], &SplitParameters::default()).unwrap();
        assert_eq!(max_abs_diff(&(&s.a + &s.b), &disc.generator(&[1.0])), 0.0);
        // σ ≡ 1: 𝔅 = −1 − i v ξ.
        assert!((s.dissipativity() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_and_zero_coupling() {
        let disc = bgk();
        let mut s = operator_split(&disc, &[1.0], &SplitParameters::default()).unwrap();
        let r = duhamel_identity_check(&s, 0.0, 8).unwrap();
        assert_eq!(r.enlargement, 0.0);
        s.a = CMat::zeros(32, 32);
        let r = duhamel_identity_check(&s, 1.0, 8).unwrap();
        assert_eq!(r.enlargement, 0.0);
        assert_eq!(r.shrinking, 0.0);
    }
}
