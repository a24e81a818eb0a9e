//! Single-frequency analysis: the rate certificate, exact evolution of the
//! mode equation `∂_t f̂ = (L − i v·ξ) f̂`, the Lyapunov functional and the
//! decay-bound check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{self, Fit};
use crate::linalg::{expm, CMat, CVec};
use crate::model::{Moments, Weight};
use crate::operators::{Discretization, OperatorMatrix};

/// Constants of the mode-wise decay estimate at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCertificate {
    pub xi_norm: f64,
    pub lambda_m: f64,
    #[serde(rename = "lambda_M")]
    pub lambda_macro: f64,
    #[serde(rename = "C_M")]
    pub c_macro: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub mu: f64,
}

/// `Λ = ⅓ min{1,Θ} min{1, λ_m Θ²/(K + Θκ²)}`.
pub fn big_lambda(m: &Moments) -> f64 {
    let t = m.theta_big;
    (1.0 / 3.0) * t.min(1.0) * (m.lambda_m * t * t / (m.k + t * m.kappa * m.kappa)).min(1.0)
}

/// `μ_ξ = Λ|ξ|²/(1+|ξ|²)`.
pub fn mu(m: &Moments, xi_norm: f64) -> f64 {
    let x2 = xi_norm * xi_norm;
    big_lambda(m) * x2 / (1.0 + x2)
}

pub fn certify(m: &Moments, xi: &[f64]) -> Result<RateCertificate> {
    for (name, x) in [("Theta", m.theta_big), ("K", m.k), ("kappa", m.kappa), ("lambda_m", m.lambda_m)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::NonPositive(format!("{name} = {x}")));
        }
    }
    let x2: f64 = xi.iter().map(|x| x * x).sum();
    let xn = x2.sqrt();
    let lam_big = m.theta_big * x2;
    let c_macro = (m.kappa * xn + m.k.sqrt() * x2) / (1.0 + m.theta_big * x2);
    // λ_Mλ_m/((1+λ_M)C_M²) written without the 0/0 at ξ = 0.
    let ratio = m.theta_big * (1.0 + m.theta_big * x2) / (m.kappa + m.k.sqrt() * xn).powi(2);
    let inner = 1f64.min(m.lambda_m).min(m.lambda_m * ratio);
    Ok(RateCertificate {
        xi_norm: xn,
        lambda_m: m.lambda_m,
        lambda_macro: lam_big,
        c_macro,
        delta: 0.5 * inner,
        lambda: lam_big / (3.0 * (1.0 + lam_big)) * inner,
        big_lambda: big_lambda(m),
        mu: mu(m, xn),
    })
}

#[derive(Debug, Clone)]
pub struct ModeState {
    pub xi: Vec<f64>,
    pub coeffs: CVec,
    pub t: f64,
}

impl ModeState {
    pub fn new(xi: &[f64], coeffs: CVec) -> Self {
        Self { xi: xi.to_vec(), coeffs, t: 0.0 }
    }

    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `e^{G Δt}`.
pub fn propagator(generator: &CMat, dt: f64) -> CMat {
    expm(&(generator * Complex64::new(dt, 0.0)))
}

fn is_uniform(times: &[f64]) -> bool {
    if times.len() < 3 {
        return true;
    }
    let dt = times[1] - times[0];
    times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.abs().max(1.0))
}

/// States at `times` (increasing, starting at or after `state.t`) under
/// `L − T`, reusing one propagator when the sampling is uniform.
pub fn evolve_mode(state: &ModeState, l: &OperatorMatrix, t: &OperatorMatrix, times: &[f64]) -> Result<Vec<ModeState>> {
    let g = &l.matrix - &t.matrix;
    evolve_with_generator(state, &g, times)
}

pub fn evolve_with_generator(state: &ModeState, g: &CMat, times: &[f64]) -> Result<Vec<ModeState>> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t0| t0 < state.t) {
        return Err(Error::InvalidModel("sample times must be increasing and after the initial time".into()));
    }
    let n0 = state.coeffs.norm();
    let mut out = Vec::with_capacity(times.len());
    let mut current = state.coeffs.clone();
    let mut t_now = state.t;
    let uniform = is_uniform(times);
    let mut step: Option<(f64, CMat)> = None;
    for &t in times {
        let dt = t - t_now;
        if dt > 0.0 {
            let reuse = matches!(&step, Some((h, _)) if uniform && (h - dt).abs() <= 1e-12 * dt.max(1.0));
            if !reuse {
                step = Some((dt, propagator(g, dt)));
            }
            current = &step.as_ref().unwrap().1 * &current;
        }
        t_now = t;
        let norm = current.norm();
        if !norm.is_finite() || norm > 10.0 * n0.max(f64::MIN_POSITIVE) {
            return Err(Error::Unstable(format!(
                "mode norm grew from {n0:.3e} to {norm:.3e} at t = {t}"
            )));
        }
        out.push(ModeState { xi: state.xi.clone(), coeffs: current.clone(), t });
    }
    Ok(out)
}

/// `n` uniform samples on `[0, horizon]`, including both ends.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovValue {
    pub t: f64,
    pub h: f64,
    /// `−dH/dt` from the generator.
    pub d: f64,
    pub norm_squared: f64,
}

/// `H = ½‖F‖² + δ Re⟨AF,F⟩` and `D = −dH/dt` along `∂_t F = G F`.
pub fn lyapunov(c: &CVec, g: &CMat, a: &CMat, delta: f64) -> (f64, f64) {
    let ac = a * c;
    let gc = g * c;
    let h = 0.5 * c.norm_squared() + delta * c.dotc(&ac).re;
    let dh = c.dotc(&gc).re + delta * (c.dotc(&(a * &gc)).re + gc.dotc(&ac).re);
    (h, -dh)
}

/// Lyapunov trace along a trajectory, plus central finite differences of `H`.
pub fn lyapunov_trace(traj: &[ModeState], g: &CMat, a: &CMat, delta: f64) -> (Vec<LyapunovValue>, Vec<f64>) {
    let vals: Vec<LyapunovValue> = traj
        .iter()
        .map(|s| {
            let (h, d) = lyapunov(&s.coeffs, g, a, delta);
            LyapunovValue { t: s.t, h, d, norm_squared: s.norm_squared() }
        })
        .collect();
    let fd = (0..vals.len())
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(vals.len() - 1));
            if hi == lo {
                return f64::NAN;
            }
            -(vals[hi].h - vals[lo].h) / (vals[hi].t - vals[lo].t)
        })
        .collect();
    (vals, fd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSeries {
    pub weight: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub label: String,
    pub times: Vec<f64>,
    pub norms: Vec<NormSeries>,
    /// Reference curve, when the check has one.
    pub bound: Vec<f64>,
    pub fit: Option<Fit>,
    /// Certified rate or target exponent the fit is compared against.
    pub certified: f64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl DecayReport {
    pub fn series(&self, weight: &str) -> Option<&[f64]> {
        self.norms.iter().find(|s| s.weight == weight).map(|s| s.values.as_slice())
    }
}

/// Squared weighted norm `c* G c`.
pub fn weighted_norm_squared(c: &CVec, gram: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..c.len() {
        for i in 0..c.len() {
            let g = gram[(i, j)];
            if g != 0.0 {
                s += g * (c[i].conj() * c[j]).re;
            }
        }
    }
    s
}

/// Evolve `f̂₀` at `ξ` and test the certified bound in `weight`.
///
/// For `γ_∞` every sample must satisfy `‖f̂(t)‖² ≤ 3e^{−μ_ξ t}‖f̂₀‖²`; for a
/// finite `k` the fitted squared-norm rate must reach `0.98 μ_ξ`.
pub fn mode_decay_check(
    disc: &Discretization,
    xi: &[f64],
    f0: &CVec,
    horizon: f64,
    samples: usize,
    weight: &Weight,
) -> Result<DecayReport> {
    weight.validate(disc.model.d())?;
    let cert = certify(&disc.model.moments, xi)?;
    let g = disc.generator(xi);
    let times = uniform_times(horizon, samples);
    let traj = evolve_with_generator(&ModeState::new(xi, f0.clone()), &g, &times[1..])?;
    let mut states = vec![ModeState::new(xi, f0.clone())];
    states.extend(traj);
    let gram = disc.basis.weight_gram(weight, &disc.model.equilibrium);
    let values: Vec<f64> = states.iter().map(|s| weighted_norm_squared(&s.coeffs, &gram)).collect();
    let n0 = values[0];
    let mut violations = Vec::new();
    let (bound, fit, passed) = match weight {
        Weight::InverseEquilibrium => {
            let bound: Vec<f64> = times.iter().map(|t| 3.0 * (-cert.mu * t).exp() * n0).collect();
            for ((t, v), b) in times.iter().zip(&values).zip(&bound) {
                if *v > b * (1.0 + 1e-8) {
                    violations.push(Violation { t: *t, measured: *v, bound: *b });
                }
            }
            let t_end = fit::decay_horizon(&times, &values, 1e-8);
            let fit = fit::exponential_rate(&times, &values, (0.5 * t_end, t_end));
            let passed = violations.is_empty();
            (bound, fit, passed)
        }
        Weight::Polynomial(_) => {
            let t_end = fit::decay_horizon(&times, &values, 1e-8);
            let fit = fit::exponential_rate(&times, &values, (0.5 * t_end, t_end));
            let rate = fit.map_or(0.0, |f| f.value);
            let passed = cert.mu == 0.0 || rate >= cert.mu * (1.0 - 0.02);
            if !passed {
                violations.push(Violation { t: t_end, measured: rate, bound: cert.mu });
            }
            (vec![], fit, passed)
        }
    };
    Ok(DecayReport {
        label: format!("mode xi={:?}", xi),
        times,
        norms: vec![NormSeries { weight: weight.label(), values }],
        bound,
        fit,
        certified: cert.mu,
        violations,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelSpec};

    fn fp() -> Moments {
        Model::new(ModelSpec::fokker_planck(1)).unwrap().moments
    }

    #[test]
    fn gaussian_fokker_planck_lambda_is_one_twelfth() {
        assert!((big_lambda(&fp()) * 12.0 - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn bgk_lambda_is_one_twenty_first() {
        let m = Model::new(ModelSpec::bgk(1)).unwrap().moments;
        assert_eq!(m.kappa, 2.0);
        assert!((big_lambda(&m) - 1.0 / 21.0).abs() < 1e-16);
    }

    #[test]
    fn certificate_at_zero_frequency() {
        let c = certify(&fp(), &[0.0]).unwrap();
        assert_eq!(c.mu, 0.0);
        assert_eq!(c.lambda, 0.0);
        assert!(c.delta > 0.0 && c.delta <= 0.5);
    }

    #[test]
    fn lambda_dominates_mu() {
        let m = fp();
        for x in [0.01, 0.1, 1.0, 3.0, 30.0, 1e3] {
            let c = certify(&m, &[x]).unwrap();
            assert!(c.lambda >= c.mu * (1.0 - 1e-14), "{x}: {} < {}", c.lambda, c.mu);
            assert!(c.mu <= c.big_lambda);
        }
    }

    #[test]
    fn bgk_micro_datum_decays_like_exp_minus_t() {
        let disc = Discretization::default_for(Model::new(ModelSpec::bgk(1)).unwrap(), 16).unwrap();
        let mut c = CVec::zeros(16);
        c[1] = Complex64::new(1.0, 0.0);
        c[4] = Complex64::new(0.0, -2.0);
        let g = disc.generator(&[0.0]);
        let traj = evolve_with_generator(&ModeState::new(&[0.0], c.clone()), &g, &[0.5, 1.0, 3.0]).unwrap();
        for s in traj {
            assert!((s.coeffs.norm() - (-s.t).exp() * c.norm()).abs() < 1e-13);
        }
    }
}
