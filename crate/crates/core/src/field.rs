//! Phase-space solutions assembled from Fourier modes: torus (`ξ ∈ ℤ^d`) and
//! whole space (`ξ`-quadrature), separable initial data, moment-cancelling
//! data and the polynomial-moment ledger.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{self, Fit};
use crate::linalg::{expm, CVec, I, ONE, ZERO};
use crate::model::{sphere_area, Weight};
use crate::modes::{self, lyapunov, propagator, weighted_norm_squared, DecayReport, NormSeries, Violation};
use crate::operators::Discretization;
use crate::quadrature::{hermite_orthonormal, trapezoid, GaussHermite};

/// `∂^a φ` for the unit Gaussian `φ(x) = (2π)^{−d/2}e^{−|x|²/2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XProfile {
    pub derivative: Vec<usize>,
}

/// `E[Z^m]` for a standard normal `Z`.
pub fn normal_moment(m: usize) -> f64 {
    if m % 2 == 1 {
        0.0
    } else {
        (1..m).step_by(2).map(|k| k as f64).product()
    }
}

fn falling(m: usize, a: usize) -> f64 {
    (0..a).map(|k| (m - k) as f64).product()
}

impl XProfile {
    pub fn gaussian(d: usize) -> Self {
        Self { derivative: vec![0; d] }
    }

    pub fn derivative(a: Vec<usize>) -> Self {
        Self { derivative: a }
    }

    pub fn order(&self) -> usize {
        self.derivative.iter().sum()
    }

    /// `∫ ∂^aφ(x) e^{−ix·ξ} dx = (iξ)^a e^{−|ξ|²/2}`.
    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        let mut z = Complex64::new((-0.5 * xi.iter().map(|x| x * x).sum::<f64>()).exp(), 0.0);
        for (a, x) in self.derivative.iter().zip(xi) {
            z *= (I * x).powu(*a as u32);
        }
        z
    }

    /// Pointwise value `∏ (−1)^{a_j} He_{a_j}(x_j) φ(x_j)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative
            .iter()
            .zip(x)
            .map(|(&a, &xj)| {
                let he = hermite_orthonormal(a + 1, xj)[a] * (1..=a).map(|k| k as f64).product::<f64>().sqrt();
                let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                sign * he * (-0.5 * xj * xj).exp() / (2.0 * PI).sqrt()
            })
            .product()
    }

    /// `∫ x^α ∂^aφ dx` in closed form.
    pub fn moment(&self, alpha: &[usize]) -> f64 {
        self.derivative
            .iter()
            .zip(alpha)
            .map(|(&a, &m)| {
                if m < a {
                    0.0
                } else {
                    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                    sign * falling(m, a) * normal_moment(m - a)
                }
            })
            .product()
    }

    /// Envelope `|ξ|^{|a|} e^{−|ξ|²/2} ≥ |φ̂_a(ξ)|` as a radial function.
    fn envelope(&self, r: f64) -> f64 {
        r.powi(self.order() as i32) * (-0.5 * r * r).exp()
    }
}

/// Velocity factor of a separable term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum VProfile {
    Equilibrium,
    /// `He_b(v) M(v)` (tensor product of probabilists' Hermite polynomials).
    Hermite(Vec<usize>),
    /// `(1+|v|²)^{−p}`, representable on grid bases only.
    AlgebraicTail(f64),
    Coordinates(Vec<f64>),
}

impl VProfile {
    pub fn coordinates(&self, disc: &Discretization) -> Result<DVector<f64>> {
        let basis = &disc.basis;
        let eq = &disc.model.equilibrium;
        match self {
            VProfile::Equilibrium => Ok(basis.equilibrium.clone()),
            VProfile::Hermite(b) => {
                if b.len() != basis.d {
                    return Err(Error::Dimension { expected: basis.d, got: b.len() });
                }
                if basis.is_hermite() {
                    if b.iter().any(|&k| k >= basis.shape[0]) {
                        return Err(Error::Resolution(format!("Hermite index {b:?} exceeds the basis")));
                    }
                    let mut c = DVector::zeros(basis.size());
                    let scale: f64 = b.iter().map(|&k| (1..=k).map(|j| j as f64).product::<f64>().sqrt()).product();
                    c[basis.flat_index(b)] = scale;
                    Ok(c)
                } else {
                    let b = b.clone();
                    Ok(basis.project_ratio(
                        move |v| {
                            b.iter()
                                .zip(v)
                                .map(|(&k, &x)| {
                                    hermite_orthonormal(k + 1, x)[k] * (1..=k).map(|j| j as f64).product::<f64>().sqrt()
                                })
                                .product()
                        },
                        eq,
                    ))
                }
            }
            VProfile::AlgebraicTail(p) => {
                if basis.is_hermite() {
                    return Err(Error::BasisMismatch("algebraic tails are not in L²(dγ_∞); use a grid basis".into()));
                }
                let p = *p;
                Ok(basis.project(move |v| (1.0 + v.iter().map(|x| x * x).sum::<f64>()).powf(-p), eq))
            }
            VProfile::Coordinates(c) => {
                if c.len() != basis.size() {
                    return Err(Error::Dimension { expected: basis.size(), got: c.len() });
                }
                Ok(DVector::from_column_slice(c))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableTerm {
    pub coeff: f64,
    pub x: XProfile,
    pub v: VProfile,
}

/// `f₀(x,v) = Σ cᵢ Xᵢ(x) Vᵢ(v)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeparableDatum {
    pub terms: Vec<SeparableTerm>,
}

impl SeparableDatum {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `φ(x) M(v)`.
    pub fn gaussian(d: usize) -> Self {
        Self { terms: vec![SeparableTerm { coeff: 1.0, x: XProfile::gaussian(d), v: VProfile::Equilibrium }] }
    }

    /// `∂_{x₁}φ(x) M(v)`, zero total mass.
    pub fn zero_average(d: usize) -> Self {
        let mut a = vec![0; d];
        a[0] = 1;
        Self { terms: vec![SeparableTerm { coeff: 1.0, x: XProfile::derivative(a), v: VProfile::Equilibrium }] }
    }

    pub fn push(mut self, coeff: f64, x: XProfile, v: VProfile) -> Self {
        self.terms.push(SeparableTerm { coeff, x, v });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
    }

    fn prepared(&self, disc: &Discretization) -> Result<Vec<(f64, XProfile, DVector<f64>)>> {
        self.terms
            .iter()
            .map(|t| Ok((t.coeff, t.x.clone(), t.v.coordinates(disc)?)))
            .collect()
    }

    /// Coordinates of `f̂₀(ξ, ·)`.
    pub fn fourier_coords(&self, disc: &Discretization, xi: &[f64]) -> Result<CVec> {
        let prepared = self.prepared(disc)?;
        Ok(fourier_from_prepared(&prepared, xi, disc.size()))
    }
}

fn fourier_from_prepared(prepared: &[(f64, XProfile, DVector<f64>)], xi: &[f64], n: usize) -> CVec {
    let mut c = CVec::zeros(n);
    for (coeff, x, v) in prepared {
        let s = x.fourier(xi) * *coeff;
        for (ck, vk) in c.iter_mut().zip(v.iter()) {
            *ck += s * *vk;
        }
    }
    c
}

/// All multi-indices of length `d` with entries summing to `total`.
pub fn multi_indices(d: usize, total: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in multi_indices(d - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Multi-indices with `|α| ≤ max`, ordered by degree.
pub fn multi_indices_up_to(d: usize, max: usize) -> Vec<Vec<usize>> {
    (0..=max).flat_map(|k| multi_indices(d, k)).collect()
}

/// Which phase-space monomials must integrate to zero.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCancellationSpec {
    pub ell: usize,
    /// Pairs `(α, β)` for monomials `x^α v^β`.
    pub monomials: Vec<(Vec<usize>, Vec<usize>)>,
}

impl MomentCancellationSpec {
    /// Spans `R_ℓ[X,V]`.
    pub fn new(ell: usize, d: usize) -> Self {
        let monomials = multi_indices_up_to(2 * d, ell)
            .into_iter()
            .map(|ab| (ab[..d].to_vec(), ab[d..].to_vec()))
            .collect();
        Self { ell, monomials }
    }
}

/// `∬ x^α v^β f₀ dx dv` by Gauss–Hermite quadrature in `x` and `v`.
///
/// Velocity factors are evaluated on the equilibrium profile, so the datum
/// must use the Gaussian `M`.
pub fn datum_moment(datum: &SeparableDatum, alpha: &[usize], beta: &[usize]) -> f64 {
    let q = GaussHermite::new(24);
    let he = |k: usize, z: f64| hermite_orthonormal(k + 1, z)[k] * (1..=k).map(|j| j as f64).product::<f64>().sqrt();
    datum
        .terms
        .iter()
        .map(|t| {
            let xm: f64 = t
                .x
                .derivative
                .iter()
                .zip(alpha)
                .map(|(&a, &m)| {
                    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                    q.expect(|z| z.powi(m as i32) * sign * he(a, z))
                })
                .product();
            let vm: f64 = match &t.v {
                VProfile::Equilibrium => beta.iter().map(|&b| q.expect(|z| z.powi(b as i32))).product(),
                VProfile::Hermite(bb) => {
                    bb.iter().zip(beta).map(|(&k, &b)| q.expect(|z| z.powi(b as i32) * he(k, z))).product()
                }
                _ => f64::NAN,
            };
            t.coeff * xm * vm
        })
        .sum()
}

/// Datum with every moment in `R_ℓ[X,V]` equal to zero:
/// `Σ_{|a|+|b|=ℓ+1} 2^{−|b|} ∂^aφ(x) He_b(v) M(v)`.
///
/// Equal weights are avoided: `φ'M + φvM` has no hydrodynamic component at
/// all and decays exponentially.
pub fn build_cancelling_datum(ell: usize, d: usize) -> Result<SeparableDatum> {
    if ell > 2 {
        return Err(Error::InvalidModel(format!("cancellation order ℓ = {ell} > 2 is not supported")));
    }
    let mut datum = SeparableDatum::zero();
    for ab in multi_indices(2 * d, ell + 1) {
        let (a, b) = (ab[..d].to_vec(), ab[d..].to_vec());
        let order: usize = b.iter().sum();
        let v = if order == 0 { VProfile::Equilibrium } else { VProfile::Hermite(b) };
        datum = datum.push(0.5f64.powi(order as i32), XProfile::derivative(a), v);
    }
    let spec = MomentCancellationSpec::new(ell, d);
    for (alpha, beta) in &spec.monomials {
        let m = datum_moment(&datum, alpha, beta);
        if !(m.abs() < 1e-10) {
            return Err(Error::Verification(format!("moment x^{alpha:?} v^{beta:?} = {m:e}")));
        }
    }
    Ok(datum)
}

#[derive(Debug, Clone, Serialize)]
pub enum Geometry {
    Torus { max_mode: i64 },
    WholeSpace { xi_max: f64, count: usize },
}

/// Whole-space run parameters.
#[derive(Debug, Clone)]
pub struct WholeSpaceConfig {
    pub xi_max: f64,
    /// Nodes per dimension (odd keeps `ξ = 0` on the grid).
    pub count: usize,
    pub horizon: f64,
    pub samples: usize,
    pub weights: Vec<Weight>,
    pub check_resolution: bool,
    /// Cross-term weight of the macroscopic Lyapunov functional.
    pub macro_delta: Option<f64>,
    /// Keep `ρ̂(ξ, t)` per node for the macroscopic diagnostics.
    pub keep_density: bool,
}

impl WholeSpaceConfig {
    pub fn new(d: usize) -> Self {
        Self {
            xi_max: 16.0,
            count: if d == 1 { 2049 } else { 129 },
            horizon: 200.0,
            samples: 201,
            weights: vec![Weight::InverseEquilibrium, Weight::Polynomial(d as f64 + 1.0)],
            check_resolution: true,
            macro_delta: None,
            keep_density: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ModeSamples {
    norms: Vec<Vec<f64>>,
    rho: Vec<Complex64>,
    h: Vec<f64>,
    d: Vec<f64>,
    micro: Vec<f64>,
}

fn solve_mode(
    disc: &Discretization,
    prepared: &[(f64, XProfile, DVector<f64>)],
    xi: &[f64],
    dt: f64,
    samples: usize,
    grams: &[DMatrix<f64>],
    macro_delta: Option<f64>,
) -> Result<ModeSamples> {
    let n = disc.size();
    let c0 = fourier_from_prepared(prepared, xi, n);
    let mut out = ModeSamples {
        norms: vec![Vec::with_capacity(samples); grams.len()],
        ..Default::default()
    };
    if c0.iter().all(|z| z.norm() == 0.0) {
        for s in out.norms.iter_mut() {
            s.resize(samples, 0.0);
        }
        out.rho = vec![ZERO; samples];
        out.h = vec![0.0; samples];
        out.d = vec![0.0; samples];
        out.micro = vec![0.0; samples];
        return Ok(out);
    }
    let g = disc.generator(xi);
    let step = propagator(&g, dt);
    let a = match macro_delta {
        Some(_) => Some(disc.auxiliary(xi)?.matrix),
        None => None,
    };
    let e = disc.equilibrium();
    let n0 = c0.norm();
    let mut c = c0;
    let mut next = CVec::zeros(n);
    for k in 0..samples {
        if k > 0 {
            next.gemv(ONE, &step, &c, ZERO);
            std::mem::swap(&mut c, &mut next);
            let nk = c.norm();
            if !nk.is_finite() || nk > 10.0 * n0 {
                return Err(Error::Unstable(format!("mode {xi:?} grew to {nk:.3e}")));
            }
        }
        for (s, gram) in out.norms.iter_mut().zip(grams) {
            s.push(if gram.is_identity(0.0) { c.norm_squared() } else { weighted_norm_squared(&c, gram) });
        }
        let rho = e.dotc(&c);
        out.rho.push(rho);
        out.micro.push(c.norm_squared() - rho.norm_sqr());
        if let (Some(delta), Some(a)) = (macro_delta, a.as_ref()) {
            let (h, d) = lyapunov(&c, &g, a, delta);
            out.h.push(h);
            out.d.push(d);
        }
    }
    Ok(out)
}

/// Symmetric tensor `ξ` grid with trapezoid weights times `(2π)^{−d}`.
pub fn xi_grid(d: usize, xi_max: f64, count: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, w) = trapezoid(xi_max, count);
    let mut nodes = vec![vec![]];
    let mut weights = vec![(2.0 * PI).powi(-(d as i32))];
    for _ in 0..d {
        let mut nn = Vec::with_capacity(nodes.len() * count);
        let mut nw = Vec::with_capacity(nodes.len() * count);
        for (p, pw) in nodes.iter().zip(&weights) {
            for (xi, wi) in x.iter().zip(&w) {
                let mut q = p.clone();
                q.push(*xi);
                nn.push(q);
                nw.push(pw * wi);
            }
        }
        nodes = nn;
        weights = nw;
    }
    (nodes, weights)
}

/// Macroscopic Lyapunov quantities integrated over `ξ`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MacroSums {
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    /// `‖(1−Π)f‖²`.
    pub x2: Vec<f64>,
    /// `⟨ATΠf, f⟩ = ∫Θ|ξ|²/(1+Θ|ξ|²)|ρ̂|² dμ`.
    pub y2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightFit {
    pub weight: String,
    pub fit: Option<Fit>,
    pub fit_refined: Option<Fit>,
    pub monotone_after_transient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WholeSpaceRun {
    pub times: Vec<f64>,
    pub weights: Vec<String>,
    pub norms: Vec<Vec<f64>>,
    pub norms_refined: Vec<Vec<f64>>,
    pub resolution_change: f64,
    pub tail_bound: f64,
    pub fits: Vec<WeightFit>,
    pub macro_sums: Option<MacroSums>,
    /// Base-grid nodes, quadrature weights `dμ` and `ρ̂` samples (if kept).
    #[serde(skip)]
    pub xi_nodes: Vec<Vec<f64>>,
    #[serde(skip)]
    pub xi_weights: Vec<f64>,
    #[serde(skip)]
    pub density: Vec<Vec<Complex64>>,
}

impl WholeSpaceRun {
    /// Decay report for the weight at `index` against `target` exponent.
    pub fn report(&self, index: usize, target: f64, label: &str) -> DecayReport {
        let fit = self.fits[index].fit;
        let value = fit.map_or(f64::NAN, |f| f.value);
        let passed = target == 0.0 && self.norms[index].iter().all(|v| *v == 0.0)
            || (value - target).abs() <= 0.1 * target.abs();
        let violations = if passed {
            vec![]
        } else {
            vec![Violation { t: self.times.last().copied().unwrap_or(0.0), measured: value, bound: target }]
        };
        DecayReport {
            label: label.to_string(),
            times: self.times.clone(),
            norms: self
                .weights
                .iter()
                .zip(&self.norms)
                .map(|(w, v)| NormSeries { weight: w.clone(), values: v.clone() })
                .collect(),
            bound: vec![],
            fit,
            certified: target,
            violations,
            passed,
        }
    }
}

/// Canonical representative of `{ξ, −ξ}`: the first nonzero coordinate is positive.
fn is_canonical(xi: &[f64]) -> bool {
    xi.iter().find(|x| **x != 0.0).is_none_or(|x| *x > 0.0)
}

fn mirror_index(nodes: &[Vec<f64>], count: usize, k: usize) -> usize {
    // Tensor grids are symmetric: index i ↦ count−1−i in every dimension.
    let d = nodes[0].len();
    let mut rem = k;
    let mut out = 0;
    let mut stride = 1;
    let mut digits = Vec::with_capacity(d);
    for _ in 0..d {
        digits.push(rem % count);
        rem /= count;
    }
    for dgt in digits {
        out += (count - 1 - dgt) * stride;
        stride *= count;
    }
    out
}

/// Norms of `f(t)` in `L²(dx dγ)` by `ξ`-quadrature of exact mode solutions.
pub fn wholespace_solve(disc: &Discretization, datum: &SeparableDatum, cfg: &WholeSpaceConfig) -> Result<WholeSpaceRun> {
    let d = disc.model.d();
    for w in &cfg.weights {
        w.validate(d)?;
    }
    if cfg.samples < 2 || !(cfg.horizon > 0.0) {
        return Err(Error::InvalidModel("need at least two samples and a positive horizon".into()));
    }
    let prepared = datum.prepared(disc)?;
    let count = if cfg.check_resolution { 2 * cfg.count - 1 } else { cfg.count };
    let (nodes, weights) = xi_grid(d, cfg.xi_max, count);
    let dt = cfg.horizon / (cfg.samples - 1) as f64;
    let times = modes::uniform_times(cfg.horizon, cfg.samples);
    let grams: Vec<DMatrix<f64>> = cfg.weights.iter().map(|w| disc.basis.weight_gram(w, &disc.model.equilibrium)).collect();

    let unique: Vec<usize> = (0..nodes.len()).filter(|&k| is_canonical(&nodes[k])).collect();
    let solved: Vec<Result<ModeSamples>> = unique
        .par_iter()
        .map(|&k| solve_mode(disc, &prepared, &nodes[k], dt, cfg.samples, &grams, cfg.macro_delta))
        .collect();
    let mut per_node: Vec<Option<std::sync::Arc<ModeSamples>>> = vec![None; nodes.len()];
    for (&k, r) in unique.iter().zip(solved) {
        per_node[k] = Some(std::sync::Arc::new(r?));
    }
    for k in 0..nodes.len() {
        if per_node[k].is_none() {
            let m = mirror_index(&nodes, count, k);
            per_node[k] = per_node[m].clone();
        }
    }
    let conj_needed: Vec<bool> = (0..nodes.len()).map(|k| !is_canonical(&nodes[k])).collect();

    // Base-grid membership: every other node per dimension when refined.
    let on_base = |k: usize| -> bool {
        if !cfg.check_resolution {
            return true;
        }
        let mut rem = k;
        for _ in 0..d {
            if (rem % count) % 2 == 1 {
                return false;
            }
            rem /= count;
        }
        true
    };
    let (_, base_w) = xi_grid(d, cfg.xi_max, cfg.count);
    let mut base_weights = Vec::with_capacity(base_w.len());
    let mut base_nodes = Vec::with_capacity(base_w.len());
    let mut base_index = Vec::with_capacity(base_w.len());
    {
        let mut j = 0;
        for k in 0..nodes.len() {
            if on_base(k) {
                base_nodes.push(nodes[k].clone());
                base_weights.push(base_w[j]);
                base_index.push(k);
                j += 1;
            }
        }
    }

    let nw = cfg.weights.len();
    let sum_norms = |idx: &[usize], wts: &[f64]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; cfg.samples]; nw];
        for (&k, &w) in idx.iter().zip(wts) {
            let m = per_node[k].as_ref().unwrap();
            for (o, s) in out.iter_mut().zip(&m.norms) {
                for (a, b) in o.iter_mut().zip(s) {
                    *a += w * b;
                }
            }
        }
        out
    };
    let norms = sum_norms(&base_index, &base_weights);
    let all_index: Vec<usize> = (0..nodes.len()).collect();
    let norms_refined = if cfg.check_resolution { sum_norms(&all_index, &weights) } else { norms.clone() };

    // Values at round-off level relative to the initial norm carry no information.
    let mut resolution_change: f64 = 0.0;
    for (a, b) in norms.iter().zip(&norms_refined) {
        let floor = 1e-13 * b[0];
        for (x, y) in a.iter().zip(b) {
            if *y > floor {
                resolution_change = resolution_change.max(((x - y) / y).abs());
            }
        }
    }
    if cfg.check_resolution && resolution_change > 0.01 {
        return Err(Error::Resolution(format!(
            "ξ-grid refinement changes the norm by {:.2}%",
            100.0 * resolution_change
        )));
    }

    let window = (0.5 * cfg.horizon, cfg.horizon);
    let fits = cfg
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mono = norms[i]
                .iter()
                .zip(&times)
                .skip_while(|(_, t)| **t < 1.0)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|p| *p[1].0 <= *p[0].0 * (1.0 + 1e-8) + 1e-300);
            WeightFit {
                weight: w.label(),
                fit: fit::algebraic_exponent(&times, &norms[i], window),
                fit_refined: fit::algebraic_exponent(&times, &norms_refined[i], window),
                monotone_after_transient: mono,
            }
        })
        .collect();

    let macro_sums = cfg.macro_delta.map(|_| {
        let theta = disc.model.moments.theta_big;
        let mut s = MacroSums {
            h: vec![0.0; cfg.samples],
            d: vec![0.0; cfg.samples],
            x2: vec![0.0; cfg.samples],
            y2: vec![0.0; cfg.samples],
        };
        for (&k, &w) in base_index.iter().zip(&base_weights) {
            let m = per_node[k].as_ref().unwrap();
            let x2: f64 = nodes[k].iter().map(|x| x * x).sum();
            let fac = theta * x2 / (1.0 + theta * x2);
            for j in 0..cfg.samples {
                s.h[j] += w * m.h[j];
                s.d[j] += w * m.d[j];
                s.x2[j] += w * m.micro[j];
                s.y2[j] += w * fac * m.rho[j].norm_sqr();
            }
        }
        s
    });

    let density = if cfg.keep_density {
        base_index
            .iter()
            .map(|&k| {
                let m = per_node[k].as_ref().unwrap();
                if conj_needed[k] {
                    m.rho.iter().map(|z| z.conj()).collect()
                } else {
                    m.rho.clone()
                }
            })
            .collect()
    } else {
        vec![]
    };

    let tail_bound = tail_bound(disc, &prepared, cfg.xi_max);
    Ok(WholeSpaceRun {
        times,
        weights: cfg.weights.iter().map(|w| w.label()).collect(),
        norms,
        norms_refined,
        resolution_change,
        tail_bound,
        fits,
        macro_sums,
        xi_nodes: base_nodes,
        xi_weights: base_weights,
        density,
    })
}

/// `∫_{|ξ|>Ξ} ‖f̂₀(ξ)‖²_{L²(dγ_∞)} dμ`, an upper bound for the truncated tail
/// at every time by contraction in `L²(dγ_∞)`.
fn tail_bound(disc: &Discretization, prepared: &[(f64, XProfile, DVector<f64>)], xi_max: f64) -> f64 {
    let d = disc.model.d();
    let pts = crate::quadrature::GaussLegendre::new(32).composite(xi_max, xi_max + 40.0, 40);
    let s: f64 = pts
        .iter()
        .map(|&(r, w)| {
            let env: f64 = prepared.iter().map(|(c, x, v)| c.abs() * x.envelope(r) * v.norm()).sum();
            w * env * env * r.powi(d as i32 - 1)
        })
        .sum();
    sphere_area(d) * (2.0 * PI).powi(-(d as i32)) * s
}

/// Reconstruct `f(t, x, v)` in `d = 1` on a tensor `(x, v)` grid from modes.
pub fn reconstruct_density(
    disc: &Discretization,
    datum: &SeparableDatum,
    t: f64,
    xs: &[f64],
    vs: &[f64],
    xi_max: f64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    if disc.model.d() != 1 {
        return Err(Error::Dimension { expected: 1, got: disc.model.d() });
    }
    let prepared = datum.prepared(disc)?;
    let (nodes, weights) = xi_grid(1, xi_max, count);
    let n = disc.size();
    let eq = &disc.model.equilibrium;
    // Velocity evaluation matrix: F(v) = Σ_k c_k B[v,k].
    let basis_vals: Vec<Vec<Complex64>> = vs
        .iter()
        .map(|&v| {
            (0..n)
                .map(|k| {
                    let mut e = CVec::zeros(n);
                    e[k] = ONE;
                    disc.basis.evaluate(&e, &[v], eq)
                })
                .collect()
        })
        .collect();
    let modes: Vec<Result<CVec>> = nodes
        .par_iter()
        .map(|xi| {
            let c0 = fourier_from_prepared(&prepared, xi, n);
            if t == 0.0 {
                return Ok(c0);
            }
            let p = expm(&(disc.generator(xi) * Complex64::new(t, 0.0)));
            Ok(&p * c0)
        })
        .collect();
    let modes: Vec<CVec> = modes.into_iter().collect::<Result<_>>()?;
    // f̂(ξ, v_j) for every node.
    let fv: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|c| basis_vals.iter().map(|b| b.iter().zip(c.iter()).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let mut out = vec![vec![0.0; vs.len()]; xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        for (k, xi) in nodes.iter().enumerate() {
            let phase = Complex64::new(0.0, x * xi[0]).exp() * weights[k];
            for (j, val) in fv[k].iter().enumerate() {
                out[i][j] += (phase * val).re;
            }
        }
    }
    Ok(out)
}

/// Torus datum: Fourier coefficients in `x` (with `∫_{T^d} = (2π)^d · mean`)
/// times a velocity profile.
#[derive(Debug, Clone, Serialize)]
pub struct TorusTerm {
    pub mode: Vec<i64>,
    pub coeff: Complex64,
    pub v: VProfile,
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusRun {
    pub report: DecayReport,
    pub horizon: f64,
    pub mass_drift: f64,
    pub rho_infinity: Complex64,
}

/// `(1 + cos x₁) M(v)` on `T^d`.
pub fn torus_cosine_datum(d: usize) -> Vec<TorusTerm> {
    let mut plus = vec![0; d];
    plus[0] = 1;
    let minus: Vec<i64> = plus.iter().map(|m| -m).collect();
    vec![
        TorusTerm { mode: vec![0; d], coeff: ONE, v: VProfile::Equilibrium },
        TorusTerm { mode: plus, coeff: Complex64::new(0.5, 0.0), v: VProfile::Equilibrium },
        TorusTerm { mode: minus, coeff: Complex64::new(0.5, 0.0), v: VProfile::Equilibrium },
    ]
}

/// Distance to `f_∞ = ρ_∞ M` on `T^d`; doubles the horizon until the squared
/// distance falls by `1e-8` (at most four doublings).
pub fn torus_solve(
    disc: &Discretization,
    datum: &[TorusTerm],
    max_mode: i64,
    horizon: f64,
    samples: usize,
    weight: &Weight,
) -> Result<TorusRun> {
    let d = disc.model.d();
    weight.validate(d)?;
    let n = disc.size();
    let mut coeffs: BTreeMap<Vec<i64>, CVec> = BTreeMap::new();
    for t in datum {
        if t.mode.len() != d {
            return Err(Error::Dimension { expected: d, got: t.mode.len() });
        }
        if t.mode.iter().any(|m| m.abs() > max_mode) {
            continue;
        }
        let v = t.v.coordinates(disc)?.map(|x| Complex64::new(x, 0.0));
        *coeffs.entry(t.mode.clone()).or_insert_with(|| CVec::zeros(n)) += v * t.coeff;
    }
    let zero = vec![0i64; d];
    let e = disc.equilibrium();
    let rho_inf = coeffs.get(&zero).map_or(ZERO, |c| e.dotc(c));
    let gram = disc.basis.weight_gram(weight, &disc.model.equilibrium);
    let vol = (2.0 * PI).powi(d as i32);
    let cert_lambda = modes::big_lambda(&disc.model.moments);

    let mut t_end = horizon;
    for _ in 0..5 {
        let times = modes::uniform_times(t_end, samples);
        let dt = times[1];
        let mut dist = vec![0.0; samples];
        let mut mass = vec![ZERO; samples];
        for (mode, c0) in &coeffs {
            let xi: Vec<f64> = mode.iter().map(|&m| m as f64).collect();
            let step = propagator(&disc.generator(&xi), dt);
            let mut c = c0.clone();
            for k in 0..samples {
                if k > 0 {
                    c = &step * &c;
                }
                let diff = if *mode == zero { &c - &e * rho_inf } else { c.clone() };
                dist[k] += vol * weighted_norm_squared(&diff, &gram);
                if *mode == zero {
                    mass[k] = vol * e.dotc(&c);
                }
            }
        }
        let total = fit::decay_horizon(&times, &dist, 1e-8);
        let drop_reached = dist[0] == 0.0 || dist.last().copied().unwrap_or(0.0) <= 1e-8 * dist[0];
        if drop_reached || t_end >= 16.0 * horizon {
            let fit = fit::exponential_rate(&times, &dist, (0.5 * total, total));
            let rate = fit.map_or(f64::INFINITY, |f| f.value);
            let passed = dist[0] == 0.0 && dist.iter().all(|x| *x == 0.0) || rate >= 0.5 * cert_lambda;
            let m0 = mass[0];
            let mass_drift = mass.iter().map(|m| (m - m0).norm()).fold(0.0, f64::max);
            let violations = if passed {
                vec![]
            } else {
                vec![Violation { t: total, measured: rate, bound: 0.5 * cert_lambda }]
            };
            return Ok(TorusRun {
                report: DecayReport {
                    label: "torus".into(),
                    times,
                    norms: vec![NormSeries { weight: weight.label(), values: dist }],
                    bound: vec![],
                    fit,
                    certified: 0.5 * cert_lambda,
                    violations,
                    passed,
                },
                horizon: t_end,
                mass_drift,
                rho_infinity: rho_inf,
            });
        }
        t_end *= 2.0;
    }
    unreachable!("the horizon loop returns by its last iteration")
}

/// Velocity-moment functional `w_β` with `∫ v^β F dv = w_β · c`.
pub fn velocity_moment_functional(disc: &Discretization, beta: &[usize]) -> DVector<f64> {
    let basis = &disc.basis;
    if basis.is_hermite() {
        let n = basis.shape[0];
        let q = GaussHermite::new(n + beta.iter().max().copied().unwrap_or(0) + 2);
        let per_dim: Vec<Vec<f64>> = beta
            .iter()
            .map(|&b| (0..n).map(|k| q.expect(|z| z.powi(b as i32) * hermite_orthonormal(k + 1, z)[k])).collect())
            .collect();
        DVector::from_fn(basis.size(), |k, _| {
            basis.multi_index(k).iter().enumerate().map(|(j, &i)| per_dim[j][i]).product()
        })
    } else {
        DVector::from_iterator(
            basis.size(),
            basis.nodes.iter().zip(&basis.weights).zip(&basis.m_nodes).map(|((v, w), m)| {
                v.iter().zip(beta).map(|(x, &b)| x.powi(b as i32)).product::<f64>() * (w * m).sqrt()
            }),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarMoment {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentLedger {
    pub ell: usize,
    pub times: Vec<f64>,
    pub alphas: Vec<Vec<usize>>,
    /// `‖X^α[f](t)‖_{L²(dγ_∞)}` per `α`.
    pub vector_norms: Vec<Vec<f64>>,
    pub scalar: Vec<ScalarMoment>,
    pub max_scalar: f64,
    pub violations: Vec<Violation>,
    /// Ratio of `Σ_α ‖X^α[f]‖` at `t = 10` (or the last sample) to its initial value.
    pub decay_ratio_t10: f64,
}

/// Evolve `X^α[f](t, v) = ∫ x^α f dx` for `|α| ≤ ℓ` through
/// `∂_t X^α = L X^α + Σ_j α_j v_j X^{α−e_j}`.
pub fn moment_ledger_evolution(
    disc: &Discretization,
    datum: &SeparableDatum,
    ell: usize,
    horizon: f64,
    samples: usize,
) -> Result<MomentLedger> {
    let d = disc.model.d();
    let n = disc.size();
    let alphas = multi_indices_up_to(d, ell);
    let na = alphas.len();
    let pos = |a: &[usize]| alphas.iter().position(|b| b.as_slice() == a);
    let mut q = DMatrix::<f64>::zeros(na * n, na * n);
    for (ia, a) in alphas.iter().enumerate() {
        q.view_mut((ia * n, ia * n), (n, n)).copy_from(&disc.collision);
        for j in 0..d {
            if a[j] == 0 {
                continue;
            }
            let mut lower = a.clone();
            lower[j] -= 1;
            let ib = pos(&lower).expect("lower multi-index present");
            let block = &disc.basis.velocity[j] * a[j] as f64;
            q.view_mut((ia * n, ib * n), (n, n)).copy_from(&block);
        }
    }
    let prepared = datum.prepared(disc)?;
    let mut y = CVec::zeros(na * n);
    for (ia, a) in alphas.iter().enumerate() {
        for (coeff, x, v) in &prepared {
            let s = coeff * x.moment(a);
            for k in 0..n {
                y[ia * n + k] += Complex64::new(s * v[k], 0.0);
            }
        }
    }
    let times = modes::uniform_times(horizon, samples);
    let step = expm(&crate::linalg::to_complex(&q).scale(times[1]));
    let betas = multi_indices_up_to(d, ell);
    let functionals: Vec<DVector<f64>> = betas.iter().map(|b| velocity_moment_functional(disc, b)).collect();
    let mut vector_norms = vec![Vec::with_capacity(samples); na];
    let mut scalar: Vec<ScalarMoment> = Vec::new();
    for a in &alphas {
        for b in &betas {
            if a.iter().sum::<usize>() + b.iter().sum::<usize>() <= ell {
                scalar.push(ScalarMoment { alpha: a.clone(), beta: b.clone(), values: Vec::with_capacity(samples) });
            }
        }
    }
    for k in 0..samples {
        if k > 0 {
            y = &step * &y;
        }
        for (ia, _) in alphas.iter().enumerate() {
            let block = y.rows(ia * n, n);
            vector_norms[ia].push(block.norm());
        }
        for s in scalar.iter_mut() {
            let ia = pos(&s.alpha).unwrap();
            let ib = betas.iter().position(|b| *b == s.beta).unwrap();
            let block = y.rows(ia * n, n);
            let val: Complex64 = functionals[ib].iter().zip(block.iter()).map(|(w, z)| z * *w).sum();
            s.values.push(val.re);
        }
    }
    let mut violations = Vec::new();
    let mut max_scalar: f64 = 0.0;
    for s in &scalar {
        for (t, v) in times.iter().zip(&s.values) {
            max_scalar = max_scalar.max(v.abs());
            if v.abs() > 1e-8 {
                violations.push(Violation { t: *t, measured: v.abs(), bound: 1e-8 });
            }
        }
    }
    let total: Vec<f64> = (0..samples).map(|k| vector_norms.iter().map(|v| v[k]).sum()).collect();
    let k10 = times.iter().position(|t| *t >= 10.0 - 1e-12).unwrap_or(samples - 1);
    let decay_ratio_t10 = if total[0] == 0.0 { 0.0 } else { total[k10] / total[0] };
    Ok(MomentLedger { ell, times, alphas, vector_norms, scalar, max_scalar, violations, decay_ratio_t10 })
}

/// Symbolic residual of the telescoping identity
/// `Σ_{|α|≤ℓ} (1/α!)(∂_{x_i}X^α ∂^αφ − X^α ∂^{α∨i}φ) = −Σ_{|α|=ℓ} (1/α!) X^α ∂^{α∨i}φ`,
/// maximized over directions `i`. Terms are keyed by the symbols `(X^β, ∂^γφ)`.
pub fn telescoping_residual(ell: usize, d: usize) -> f64 {
    let fact = |a: &[usize]| a.iter().map(|&k| (1..=k).map(|j| j as f64).product::<f64>()).product::<f64>();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let mut terms: BTreeMap<(Vec<usize>, Vec<usize>), f64> = BTreeMap::new();
        for alpha in multi_indices_up_to(d, ell) {
            let inv = 1.0 / fact(&alpha);
            if alpha[i] > 0 {
                // ∂_{x_i} X^α = α_i X^{α∧i}.
                let mut wedge = alpha.clone();
                wedge[i] -= 1;
                *terms.entry((wedge, alpha.clone())).or_default() += inv * alpha[i] as f64;
            }
            let mut vee = alpha.clone();
            vee[i] += 1;
            *terms.entry((alpha.clone(), vee)).or_default() -= inv;
        }
        for alpha in multi_indices(d, ell) {
            let mut vee = alpha.clone();
            vee[i] += 1;
            *terms.entry((alpha.clone(), vee)).or_default() += 1.0 / fact(&alpha);
        }
        worst = terms.values().fold(worst, |w, v| w.max(v.abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_derivative_moments() {
        // ∫ x ∂φ = −1, ∫ x² ∂²φ = 2, ∫ x² φ = 1.
        assert_eq!(XProfile::derivative(vec![1]).moment(&[1]), -1.0);
        assert_eq!(XProfile::derivative(vec![2]).moment(&[2]), 2.0);
        assert_eq!(XProfile::gaussian(1).moment(&[2]), 1.0);
        assert_eq!(XProfile::derivative(vec![2]).moment(&[1]), 0.0);
    }

    #[test]
    fn gaussian_derivative_values() {
        let p = XProfile::derivative(vec![1]);
        let x = 0.7f64;
        let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        assert!((p.eval(&[x]) + x * phi).abs() < 1e-15);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices_up_to(2, 2).len(), 6);
        assert_eq!(MomentCancellationSpec::new(1, 1).monomials.len(), 3);
    }

    #[test]
    fn telescoping_is_exact() {
        for ell in 0..=2 {
            for d in 1..=2 {
                assert_eq!(telescoping_residual(ell, d), 0.0);
            }
        }
    }

    #[test]
    fn cancelling_datum_has_zero_moments() {
        for ell in 0..=2 {
            let datum = build_cancelling_datum(ell, 1).unwrap();
            assert_eq!(datum.terms.len(), ell + 2);
        }
        assert!(build_cancelling_datum(3, 1).is_err());
    }

    #[test]
    fn zero_average_datum_has_zero_mass() {
        let m = datum_moment(&SeparableDatum::zero_average(1), &[0], &[0]);
        assert!(m.abs() < 1e-15);
        assert!((datum_moment(&SeparableDatum::gaussian(1), &[0], &[0]) - 1.0).abs() < 1e-14);
    }
}
