//! Direct-space macroscopic machinery: elliptic auxiliaries `u_f`, `v_f`,
//! the macroscopic Lyapunov functional, Nash ratios and the entropy decay
//! inequality, all evaluated on the `ξ` grid shared with [`crate::field`].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{wholespace_solve, SeparableDatum, VProfile, WholeSpaceConfig};
use crate::model::{CollisionCase, Moments, Weight};
use crate::modes::Violation;
use crate::operators::Discretization;
use crate::quadrature::GaussLegendre;

/// `ρ̂`, `û_f = ρ̂/(1+Θ|ξ|²)` and `v̂_f = Θ|ξ|² û_f` on a `ξ` grid.
#[derive(Debug, Clone)]
pub struct MacroField {
    pub xi_sq: Vec<f64>,
    pub weights: Vec<f64>,
    pub rho: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub theta: f64,
}

pub fn solve_auxiliaries(nodes: &[Vec<f64>], weights: &[f64], rho: &[Complex64], theta: f64) -> MacroField {
    let xi_sq: Vec<f64> = nodes.iter().map(|x| x.iter().map(|y| y * y).sum()).collect();
    let u: Vec<Complex64> = rho.iter().zip(&xi_sq).map(|(r, s)| r / (1.0 + theta * s)).collect();
    let v = u.iter().zip(&xi_sq).map(|(u, s)| u * (theta * s)).collect();
    MacroField { xi_sq, weights: weights.to_vec(), rho: rho.to_vec(), u, v, theta }
}

impl MacroField {
    fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| w * f(k)).sum()
    }

    pub fn rho_sq(&self) -> f64 {
        self.integrate(|k| self.rho[k].norm_sqr())
    }

    pub fn u_sq(&self) -> f64 {
        self.integrate(|k| self.u[k].norm_sqr())
    }

    pub fn grad_u_sq(&self) -> f64 {
        self.integrate(|k| self.xi_sq[k] * self.u[k].norm_sqr())
    }

    pub fn lap_u_sq(&self) -> f64 {
        self.integrate(|k| self.xi_sq[k] * self.xi_sq[k] * self.u[k].norm_sqr())
    }

    /// `∫ v_f ρ_f dx = ⟨ATΠf, f⟩`.
    pub fn pairing(&self) -> f64 {
        self.integrate(|k| (self.v[k] * self.rho[k].conj()).re)
    }

    /// Relative residual of `Θ‖∇u‖² + Θ²‖Δu‖² = ∫ v_f ρ_f`.
    pub fn atpi_residual(&self) -> f64 {
        let lhs = self.theta * self.grad_u_sq() + self.theta * self.theta * self.lap_u_sq();
        let rhs = self.pairing();
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    }

    /// `‖Πf‖² − ‖u_f‖² − 2⟨ATΠf, f⟩`, nonpositive.
    pub fn elliptic_gap(&self) -> f64 {
        self.rho_sq() - self.u_sq() - 2.0 * self.pairing()
    }

    /// `|∫ u_f dx| = |ρ̂(0)|`, a lower bound for `‖u_f‖_{L¹}`.
    pub fn mass(&self) -> f64 {
        self.xi_sq
            .iter()
            .position(|s| *s == 0.0)
            .map_or(0.0, |k| self.u[k].norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroConstants {
    pub sigma_bar: f64,
    /// `𝖻 = K/(2Θ) + 2σ̄`.
    pub b: f64,
    pub delta: f64,
    /// `𝖺 = δ/4`.
    pub a: f64,
}

pub fn macro_constants(m: &Moments) -> MacroConstants {
    let b = m.k / (2.0 * m.theta_big) + 2.0 * m.sigma_bar;
    let delta = 4.0 * m.lambda_m.min(1.0) / (8.0 * b * b + 5.0);
    MacroConstants { sigma_bar: m.sigma_bar, b, delta, a: delta / 4.0 }
}

/// `R(u) = ‖u‖²/(‖u‖₁^{4/(d+2)} ‖∇u‖^{2d/(d+2)})`.
pub fn nash_ratio(l2_sq: f64, l1: f64, grad_sq: f64, d: usize) -> f64 {
    let d = d as f64;
    l2_sq / (l1.powf(4.0 / (d + 2.0)) * grad_sq.powf(d / (d + 2.0)))
}

/// Improved ratio `‖u‖²/(‖xu‖₁^{4/(d+4)} ‖∇u‖^{(d+2)/(d+4)})` for zero-average `u`.
pub fn improved_nash_ratio(l2_sq: f64, x_l1: f64, grad_sq: f64, d: usize) -> f64 {
    let d = d as f64;
    l2_sq / (x_l1.powf(4.0 / (d + 4.0)) * grad_sq.sqrt().powf((d + 2.0) / (d + 4.0)))
}

/// Norms of a one-dimensional profile by composite Gauss–Legendre quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileNorms {
    pub l1: f64,
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub x_l1: f64,
}

pub fn profile_norms(u: impl Fn(f64) -> f64, du: impl Fn(f64) -> f64, half_width: f64, panels: usize) -> ProfileNorms {
    let pts = GaussLegendre::new(16).composite(-half_width, half_width, panels);
    let mut n = ProfileNorms { l1: 0.0, l2_sq: 0.0, grad_sq: 0.0, x_l1: 0.0 };
    for (x, w) in pts {
        let ux = u(x);
        let dx = du(x);
        n.l1 += w * ux.abs();
        n.l2_sq += w * ux * ux;
        n.grad_sq += w * dx * dx;
        n.x_l1 += w * (x * ux).abs();
    }
    n
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub gaussian_ratio: f64,
    pub gaussian_ratio_refined: f64,
    /// `R(u_λ)/R(u)` for `λ ∈ {0.5, 2}`.
    pub dilation: Vec<(f64, f64)>,
    pub improved_ratio: f64,
}

/// Nash ratios of `e^{−x²/2}` and its dilations, and the improved ratio of `∂_x e^{−x²/2}`, in `d = 1`.
pub fn nash_check() -> NashReport {
    let gauss = |s: f64| {
        let u = move |x: f64| (-0.5 * (x / s).powi(2)).exp();
        let du = move |x: f64| -x / (s * s) * (-0.5 * (x / s).powi(2)).exp();
        (u, du)
    };
    let ratio = |s: f64, panels: usize| {
        let (u, du) = gauss(s);
        let n = profile_norms(u, du, 40.0 * s, panels);
        nash_ratio(n.l2_sq, n.l1, n.grad_sq, 1)
    };
    let base = ratio(1.0, 80);
    let dilation = [0.5, 2.0].iter().map(|&s| (s, ratio(s, 80) / base)).collect();
    let u = |x: f64| -x * (-0.5 * x * x).exp();
    let du = |x: f64| (x * x - 1.0) * (-0.5 * x * x).exp();
    let n = profile_norms(u, du, 40.0, 80);
    NashReport {
        gaussian_ratio: base,
        gaussian_ratio_refined: ratio(1.0, 160),
        dilation,
        improved_ratio: improved_nash_ratio(n.l2_sq, n.x_l1, n.grad_sq, 1),
    }
}

/// `∫∫ |f₀| dx dv` bound `Σ |cᵢ| ‖Xᵢ‖₁ ‖Vᵢ‖₁` (exact for a single term).
pub fn datum_l1(datum: &SeparableDatum) -> Result<f64> {
    let pts = GaussLegendre::new(16).composite(-14.0, 14.0, 56);
    let one_d = |f: &dyn Fn(f64) -> f64| pts.iter().map(|(x, w)| w * f(*x).abs()).sum::<f64>();
    let mut total = 0.0;
    for t in &datum.terms {
        let xl1: f64 = t
            .x
            .derivative
            .iter()
            .map(|&a| {
                let p = crate::field::XProfile::derivative(vec![a]);
                one_d(&|x| p.eval(&[x]))
            })
            .product();
        let vl1: f64 = match &t.v {
            VProfile::Equilibrium => 1.0,
            VProfile::Hermite(b) => b
                .iter()
                .map(|&k| {
                    let p = crate::field::XProfile::derivative(vec![k]);
                    one_d(&|x| p.eval(&[x]))
                })
                .product(),
            _ => return Err(Error::Support("L¹ norm is available for Gaussian-type velocity profiles only".into())),
        };
        total += t.coeff.abs() * xl1 * vl1;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    /// `X = ‖(1−Π)f‖`.
    pub x: Vec<f64>,
    /// `Y = ⟨ATΠf, f⟩^{1/2}`.
    pub y: Vec<f64>,
    pub constants: MacroConstants,
    pub theta: f64,
    pub dim: usize,
    /// Largest measured Nash ratio of `u_f(t)` (used as `𝒞_Nash`).
    pub nash_constant: f64,
    /// Worst `‖Πf‖² − ‖u_f‖² − 2Y²` (nonpositive).
    pub elliptic_gap: f64,
    pub l1: f64,
    pub monotone: bool,
    pub floor_violations: Vec<Violation>,
}

/// Macroscopic Lyapunov traces along a whole-space trajectory.
pub fn macro_entropy(disc: &Discretization, datum: &SeparableDatum, cfg: &WholeSpaceConfig) -> Result<EntropyTrace> {
    let m = &disc.model.moments;
    if disc.model.spec.case == CollisionCase::FokkerPlanck && (m.sigma_bar - 0.5 * (m.theta / m.theta_big).sqrt()).abs() > 1e-12 {
        return Err(Error::InvalidModel("Case (a) requires σ̄ = ½√(θ/Θ)".into()));
    }
    let constants = macro_constants(m);
    let mut cfg = cfg.clone();
    cfg.macro_delta = Some(constants.delta);
    cfg.keep_density = true;
    cfg.weights = vec![Weight::InverseEquilibrium];
    let run = wholespace_solve(disc, datum, &cfg)?;
    let sums = run.macro_sums.expect("macro sums requested");
    let d = disc.model.d();
    let samples = run.times.len();
    let mut nash_constant: f64 = 0.0;
    let mut elliptic_gap = f64::NEG_INFINITY;
    for k in 0..samples {
        let rho: Vec<Complex64> = run.density.iter().map(|r| r[k]).collect();
        let field = solve_auxiliaries(&run.xi_nodes, &run.xi_weights, &rho, m.theta_big);
        let g = field.grad_u_sq();
        if g > 0.0 && field.mass() > 0.0 {
            nash_constant = nash_constant.max(nash_ratio(field.u_sq(), field.mass(), g, d));
        }
        elliptic_gap = elliptic_gap.max(field.elliptic_gap());
    }
    let x: Vec<f64> = sums.x2.iter().map(|v| v.max(0.0).sqrt()).collect();
    let y: Vec<f64> = sums.y2.iter().map(|v| v.max(0.0).sqrt()).collect();
    let monotone = sums.h.windows(2).all(|w| w[1] <= w[0] + 1e-8 * sums.h[0].abs());
    let floor_violations = (0..samples)
        .filter_map(|k| {
            let floor = constants.a * (sums.x2[k] + 2.0 * sums.y2[k]);
            (sums.d[k] < floor - 1e-8 * sums.h[0].abs()).then(|| Violation { t: run.times[k], measured: sums.d[k], bound: floor })
        })
        .collect();
    Ok(EntropyTrace {
        times: run.times,
        h: sums.h,
        d: sums.d,
        x,
        y,
        constants,
        theta: m.theta_big,
        dim: d,
        nash_constant,
        elliptic_gap,
        l1: datum_l1(datum)?,
        monotone,
        floor_violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyDecayReport {
    /// `𝖼 = 2Θ 𝒞_Nash^{−1−2/d} ‖f₀‖₁^{−4/d}`.
    pub c_small: f64,
    pub c0: f64,
    pub bound: Vec<f64>,
    pub differential_violations: Vec<Violation>,
    pub integrated_violations: Vec<Violation>,
    pub passed: bool,
}

/// Solve `y + (y/𝖼)^{d/(d+2)} = z` for `y` by bisection.
pub fn phi(z: f64, c: f64, d: usize) -> f64 {
    let p = d as f64 / (d as f64 + 2.0);
    let (mut lo, mut hi) = (0.0, z);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + (mid / c).powf(p) > z {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Checks `−dH/dt ≥ c₀ H^{1+2/d}` and `H(t) ≤ (H₀^{−2/d} + c₀(2/d)t)^{−d/2}`.
pub fn entropy_decay_check(trace: &EntropyTrace) -> EntropyDecayReport {
    let d = trace.dim as f64;
    let k = &trace.constants;
    let h0 = trace.h.first().copied().unwrap_or(0.0);
    if h0 <= 0.0 || trace.nash_constant <= 0.0 {
        let passed = trace.h.iter().all(|h| *h <= 0.0);
        return EntropyDecayReport {
            c_small: f64::NAN,
            c0: 0.0,
            bound: vec![0.0; trace.h.len()],
            differential_violations: vec![],
            integrated_violations: vec![],
            passed,
        };
    }
    let c_small = 2.0 * trace.theta * trace.nash_constant.powf(-1.0 - 2.0 / d) * trace.l1.powf(-4.0 / d);
    let z0 = 2.0 * h0 / (1.0 + k.delta);
    let phi0 = phi(z0, c_small, trace.dim);
    let c0 = k.a
        * (phi0.powf(2.0 / (d + 2.0)) + c_small.powf(-d / (d + 2.0))).powf(-(d + 2.0) / d)
        * (2.0 / (1.0 + k.delta)).powf(1.0 + 2.0 / d);
    let bound: Vec<f64> = trace.times.iter().map(|t| (h0.powf(-2.0 / d) + c0 * (2.0 / d) * t).powf(-d / 2.0)).collect();
    let slack = 1e-8 * h0;
    let differential_violations = trace
        .times
        .iter()
        .zip(trace.h.iter().zip(&trace.d))
        .filter_map(|(t, (h, dd))| {
            let rhs = c0 * h.max(0.0).powf(1.0 + 2.0 / d);
            (*dd < rhs - slack).then_some(Violation { t: *t, measured: *dd, bound: rhs })
        })
        .collect::<Vec<_>>();
    let integrated_violations = trace
        .times
        .iter()
        .zip(trace.h.iter().zip(&bound))
        .filter_map(|(t, (h, b))| (*h > b + slack).then_some(Violation { t: *t, measured: *h, bound: *b }))
        .collect::<Vec<_>>();
    let passed = differential_violations.is_empty() && integrated_violations.is_empty();
    EntropyDecayReport { c_small, c0, bound, differential_violations, integrated_violations, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelSpec};

    #[test]
    fn constants_match_hand_arithmetic() {
        let fp = macro_constants(&Model::new(ModelSpec::fokker_planck(1)).unwrap().moments);
        assert!((fp.b - 2.5).abs() < 1e-14);
        assert!((fp.delta - 4.0 / 55.0).abs() < 1e-15);
        let bgk = macro_constants(&Model::new(ModelSpec::bgk(1)).unwrap().moments);
        assert!((bgk.b - 3.5).abs() < 1e-14);
        assert!((bgk.delta - 4.0 / 103.0).abs() < 1e-15);
    }

    #[test]
    fn zero_density_gives_zero_auxiliaries() {
        let nodes = vec![vec![0.0], vec![1.0]];
        let f = solve_auxiliaries(&nodes, &[1.0, 1.0], &[Complex64::new(0.0, 0.0); 2], 1.0);
        assert_eq!(f.u_sq(), 0.0);
        assert_eq!(f.pairing(), 0.0);
        assert_eq!(f.atpi_residual(), 0.0);
    }

    #[test]
    fn single_mode_division() {
        let f = solve_auxiliaries(&[vec![2.0]], &[1.0], &[Complex64::new(1.0, 0.0)], 1.0);
        assert!((f.u[0].re - 0.2).abs() < 1e-16);
        assert!((f.v[0].re - 0.8).abs() < 1e-16);
    }

    #[test]
    fn nash_dilation_invariance() {
        let r = nash_check();
        for (_, q) in &r.dilation {
            assert!((q - 1.0).abs() < 1e-10);
        }
        assert!((r.gaussian_ratio / r.gaussian_ratio_refined - 1.0).abs() < 1e-12);
        assert!(r.improved_ratio.is_finite() && r.improved_ratio > 0.0);
    }

    #[test]
    fn phi_inverts() {
        let (c, z) = (0.3, 2.0);
        let y = phi(z, c, 1);
        assert!((y + (y / c).powf(1.0 / 3.0) - z).abs() < 1e-12);
    }
}
