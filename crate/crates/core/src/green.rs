//! Exact kinetic Fokker–Planck solutions from the Gaussian Green function of
//! the sheared variables `f(t,x,v) = e^{dt} g(t, x + (1−e^t)v, e^t v)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{self, Fit};
use crate::linalg::{gemm, CMat, ONE, ZERO};
use crate::quadrature::GaussLegendre;

/// `a = e^{2t}−1`, `b = 2e^t−1−e^{2t}`, `c = e^{2t}−4e^t+2t+3`, `det = ac−b²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenCoefficients {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub det: f64,
}

pub fn green_coefficients(t: f64) -> Result<GreenCoefficients> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositive(format!("Green function time t = {t}")));
    }
    let em = t.exp_m1();
    let a = (2.0 * t).exp_m1();
    let b = -em * em;
    // c = Σ_{n≥3} (2^n − 4) t^n / n!, summed directly to avoid cancellation.
    let c = if t < 1.0 {
        let mut term = t * t / 2.0;
        let mut s = 0.0;
        for n in 3..40 {
            term *= t / n as f64;
            s += ((1u64 << n) as f64 - 4.0) * term;
        }
        s
    } else {
        (2.0 * t).exp() - 4.0 * t.exp() + 2.0 * t + 3.0
    };
    // ac − b² = 2(e^t − 1)((t − 2)(e^t − 1) + 2t); the second factor is t³/3 + O(t⁴).
    let inner = if t < 1.0 {
        // (t−2)(e^t−1) + 2t = Σ_{n≥2} (n−2) t^n / n!.
        let mut term = t;
        let mut s = 0.0;
        for n in 2..40 {
            term *= t / n as f64;
            s += (n as f64 - 2.0) * term;
        }
        s
    } else {
        (t - 2.0) * em + 2.0 * t
    };
    let det = 2.0 * em * inner;
    if !(det > 0.0) {
        return Err(Error::NonPositive(format!("Green determinant {det:e} at t = {t}")));
    }
    Ok(GreenCoefficients { t, a, b, c, det })
}

/// `G(t,x,v) = (2π)^{−d} det^{−d/2} exp(−(a|x|² − 2b x·v + c|v|²)/(2 det))`.
pub fn eval_green(t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
    if x.len() != v.len() {
        return Err(Error::Dimension { expected: x.len(), got: v.len() });
    }
    let g = green_coefficients(t)?;
    let d = x.len() as f64;
    let xx: f64 = x.iter().map(|y| y * y).sum();
    let vv: f64 = v.iter().map(|y| y * y).sum();
    let xv: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
    let q = (g.a * xx - 2.0 * g.b * xv + g.c * vv) / (2.0 * g.det);
    Ok((2.0 * PI).powf(-d) * g.det.powf(-d / 2.0) * (-q).exp())
}

/// `∫∫ G(t) dx dv` in `d = 1` by tensor Gauss–Legendre quadrature.
pub fn green_mass(t: f64) -> Result<f64> {
    let g = green_coefficients(t)?;
    // x given v is centred at (b/a)v with variance det/a.
    let (rv, rx) = (14.0 * g.a.sqrt(), 14.0 * (g.det / g.a).sqrt());
    let gl = GaussLegendre::new(24);
    let vs = gl.composite(-rv, rv, 24);
    let mut s = 0.0;
    for (v, wv) in &vs {
        let centre = g.b / g.a * v;
        for (x, wx) in gl.composite(centre - rx, centre + rx, 24) {
            s += wx * wv * eval_green(t, &[x], &[*v])?;
        }
    }
    Ok(s)
}

/// Values on a uniform `(x, v)` grid in `d = 1`, stored row-major by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub values: Vec<f64>,
}

fn uniform(half_width: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * half_width / n as f64;
    (0..n).map(|j| -half_width + j as f64 * h).collect()
}

impl PhaseGrid {
    /// Periodic-style grid `−L + jh`, `h = 2L/n`.
    pub fn from_fn(half_width: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let x = uniform(half_width, n);
        let v = x.clone();
        let values = x.iter().flat_map(|&xi| v.iter().map(move |&vj| (xi, vj))).map(|(a, b)| f(a, b)).collect();
        Self { x, v, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.v.len() + j]
    }

    fn cell(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.v[1] - self.v[0])
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell()
    }

    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖₂ / ‖other‖₂`.
    pub fn relative_l2(&self, other: &PhaseGrid) -> f64 {
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = other.values.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }
}

fn signed_frequency(m: usize, n: usize, spacing: f64) -> f64 {
    let k = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * k / (n as f64 * spacing)
}

/// `f(t)` from `f₀` on a `d = 1` grid: analytic `Ĝ` in Fourier variables,
/// velocity transform evaluated at the sheared points, inverse FFT in `x`.
pub fn solve_exact(f0: &PhaseGrid, t: f64) -> Result<PhaseGrid> {
    if t == 0.0 {
        return Ok(f0.clone());
    }
    let g = green_coefficients(t)?;
    let (nx, nv) = (f0.x.len(), f0.v.len());
    let (dx, dv) = (f0.x[1] - f0.x[0], f0.v[1] - f0.v[0]);
    let (x0, v0) = (f0.x[0], f0.v[0]);

    // Velocity support of g(t) = G(t) * g₀.
    let total: f64 = f0.values.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Ok(PhaseGrid { values: vec![0.0; nx * nv], ..f0.clone() });
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..nx {
        for (j, v) in f0.v.iter().enumerate() {
            let w = f0.at(i, j).abs() / total;
            m1 += w * v;
            m2 += w * v * v;
        }
    }
    let spread = (m2 - m1 * m1).max(0.0) + g.a;
    let reach = m1.abs() + 12.0 * spread.sqrt();
    let mut pad = 1;
    while 0.5 * (pad * nv) as f64 * dv < reach {
        pad *= 2;
    }
    let np = pad * nv;
    let half_period = 0.5 * np as f64 * dv;

    let mut planner = FftPlanner::<f64>::new();
    let fft_v = planner.plan_fft_forward(np);
    let fft_x = planner.plan_fft_forward(nx);
    let ifft_x = planner.plan_fft_inverse(nx);

    // ĝ₀ on (k_m, η_n), stored [m][n].
    let mut spec = vec![ZERO; nx * np];
    for i in 0..nx {
        let row = &mut spec[i * np..(i + 1) * np];
        for j in 0..nv {
            row[j] = Complex64::new(f0.at(i, j), 0.0);
        }
        fft_v.process(row);
    }
    let mut col = vec![ZERO; nx];
    for n in 0..np {
        for i in 0..nx {
            col[i] = spec[i * np + n];
        }
        fft_x.process(&mut col);
        for m in 0..nx {
            spec[m * np + n] = col[m];
        }
    }
    let ks: Vec<f64> = (0..nx).map(|m| signed_frequency(m, nx, dx)).collect();
    let etas: Vec<f64> = (0..np).map(|n| signed_frequency(n, np, dv)).collect();
    let mut peak: f64 = 0.0;
    for m in 0..nx {
        for n in 0..np {
            let (k, e) = (ks[m], etas[n]);
            let decay = (-0.5 * (g.a * e * e + 2.0 * g.b * e * k + g.c * k * k)).exp();
            let phase = Complex64::new(0.0, -(k * x0 + e * v0)).exp();
            let z = spec[m * np + n] * phase * (decay * dx * dv);
            spec[m * np + n] = z;
            peak = peak.max(z.norm());
        }
    }
    let active: Vec<usize> = (0..np)
        .filter(|&n| (0..nx).any(|m| spec[m * np + n].norm() > 1e-18 * peak))
        .collect();

    let et = t.exp();
    let live: Vec<usize> = (0..nv).filter(|&l| (et * f0.v[l]).abs() < half_period).collect();
    let mut h = CMat::zeros(nx, active.len());
    for (c, &n) in active.iter().enumerate() {
        for m in 0..nx {
            h[(m, c)] = spec[m * np + n];
        }
    }
    let mut phases = CMat::zeros(active.len(), live.len());
    for (c, &l) in live.iter().enumerate() {
        let s = et * f0.v[l];
        for (r, &n) in active.iter().enumerate() {
            phases[(r, c)] = Complex64::new(0.0, etas[n] * s).exp();
        }
    }
    let mut sums = CMat::zeros(nx, live.len());
    gemm(ONE, &h, &phases, ZERO, &mut sums);

    let deta = etas[1] - etas[0];
    let norm = et * deta / (2.0 * PI) / (nx as f64 * dx);
    let mut values = vec![0.0; nx * nv];
    let mut line = vec![ZERO; nx];
    for (c, &l) in live.iter().enumerate() {
        let v = f0.v[l];
        for m in 0..nx {
            let k = ks[m];
            line[m] = sums[(m, c)] * Complex64::new(0.0, v * k * (1.0 - et) + k * x0).exp() * norm;
        }
        ifft_x.process(&mut line);
        for i in 0..nx {
            values[i * nv + l] = line[i].re;
        }
    }
    let out = PhaseGrid { x: f0.x.clone(), v: f0.v.clone(), values };
    let edge = (0..nv).map(|j| out.at(0, j).abs()).fold(0.0, f64::max);
    if edge > 1e-8 * out.max_abs() {
        return Err(Error::Support(format!(
            "solution reaches the x boundary at t = {t}; widen the grid beyond |x| = {:.1}",
            -x0
        )));
    }
    Ok(out)
}

/// `f₀ = m · N(0, s_x²) ⊗ N(0, s_v²)` in each of `d` dimensions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianDatum {
    pub mass: f64,
    pub var_x: f64,
    pub var_v: f64,
    pub d: usize,
}

impl GaussianDatum {
    pub fn standard(d: usize) -> Self {
        Self { mass: 1.0, var_x: 1.0, var_v: 1.0, d }
    }

    /// `ln ‖f(t)‖_{L^p}` in closed form (`p = ∞` allowed).
    pub fn log_lp_norm(&self, t: f64, p: f64) -> Result<f64> {
        let d = self.d as f64;
        let logdet = if t == 0.0 {
            (self.var_x * self.var_v).ln()
        } else {
            let g = green_coefficients(t)?;
            (g.det + g.c * self.var_v + g.a * self.var_x + self.var_x * self.var_v).ln()
        };
        let log_sup = d * t + self.mass.ln() - d * (2.0 * PI).ln() - 0.5 * d * logdet;
        if p.is_infinite() {
            return Ok(log_sup);
        }
        // ‖f‖_p^p = e^{dt(p−1)} m^p (2π)^{−d(p−1)} det^{−d(p−1)/2} p^{−d}.
        Ok((log_sup * (p - 1.0) + self.mass.ln() - d * p.ln()) / p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LpRow {
    pub p: f64,
    pub exponent: f64,
    pub target: f64,
    pub passed: bool,
    pub fit: Option<Fit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpDecayReport {
    pub rows: Vec<LpRow>,
    pub horizon: f64,
    /// `‖f(T)‖_∞ / (‖f₀‖₁/(4πT)^d)`.
    pub amplitude_ratio: f64,
    /// `‖f(T)‖_∞ / (‖f₀‖₁ (2π)^{−d} (2T)^{−d/2})`.
    pub amplitude_ratio_exact: f64,
    pub passed: bool,
}

/// Fitted `L^p` decay exponents on `[T/2, T]` against `−d(1−1/p)`, plus the
/// `L^∞` amplitude against `‖f₀‖₁/(4πT)^d` within 15%.
pub fn lp_decay_fit(datum: &GaussianDatum, ps: &[f64], horizon: f64, samples: usize) -> Result<LpDecayReport> {
    let d = datum.d as f64;
    let times: Vec<f64> = (0..samples).map(|k| horizon * (k + 1) as f64 / samples as f64).collect();
    let mut rows = Vec::new();
    for &p in ps {
        let values = times
            .iter()
            .map(|&t| datum.log_lp_norm(t, p).map(f64::exp))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit::algebraic_exponent(&times, &values, (0.5 * horizon, horizon));
        let exponent = fit.map_or(f64::NAN, |f| f.value);
        let target = if p.is_infinite() { -d } else { -d * (1.0 - 1.0 / p) + 0.0 };
        let passed = if target == 0.0 { exponent.abs() < 1e-6 } else { (exponent - target).abs() <= 0.1 * target.abs() };
        rows.push(LpRow { p, exponent, target, passed, fit });
    }
    let sup = datum.log_lp_norm(horizon, f64::INFINITY)?.exp();
    let amplitude_ratio = sup / (datum.mass / (4.0 * PI * horizon).powf(d));
    let amplitude_ratio_exact = sup / (datum.mass * (2.0 * PI).powf(-d) * (2.0 * horizon).powf(-d / 2.0));
    let passed = rows.iter().all(|r| r.passed) && (amplitude_ratio - 1.0).abs() <= 0.15;
    Ok(LpDecayReport { rows, horizon, amplitude_ratio, amplitude_ratio_exact, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_agree_with_direct_formulas() {
        for t in [0.05, 0.3, 0.9, 1.0, 2.5] {
            let g = green_coefficients(t).unwrap();
            let (e, e2) = (t.exp(), (2.0 * t).exp());
            let c = e2 - 4.0 * e + 2.0 * t + 3.0;
            assert!((g.a - (e2 - 1.0)).abs() < 1e-13 * e2);
            assert!((g.b - (2.0 * e - 1.0 - e2)).abs() < 1e-13 * e2);
            assert!((g.c - c).abs() < 1e-10 * c.max(1e-3));
            let det = g.a * g.c - g.b * g.b;
            assert!((g.det - det).abs() < 1e-8 * det);
        }
    }

    #[test]
    fn small_time_determinant() {
        let t = 1e-3;
        let g = green_coefficients(t).unwrap();
        assert!((g.det / t.powi(4) * 3.0 - 1.0).abs() < 0.01);
        assert!((g.c / t.powi(3) * 1.5 - 1.0).abs() < 0.01);
        assert!(green_coefficients(0.0).is_err());
    }

    #[test]
    fn unit_mass_and_symmetry() {
        for t in [0.1, 1.0, 5.0] {
            assert!((green_mass(t).unwrap() - 1.0).abs() < 1e-10);
        }
        let a = eval_green(0.7, &[0.3], &[-1.1]).unwrap();
        let b = eval_green(0.7, &[-0.3], &[1.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mass_conserved_on_grid() {
        let f0 = PhaseGrid::from_fn(20.0, 256, |x, v| (-0.5 * (x * x + v * v)).exp() / (2.0 * PI));
        let f = solve_exact(&f0, 1.0).unwrap();
        assert!((f.mass() - f0.mass()).abs() < 1e-8);
    }
}
