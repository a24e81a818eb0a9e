//! Local equilibria, scattering kernels, weights, moment constants and the
//! structural hypotheses on the collision model.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{trapezoid, GaussHermite, GaussLegendre};

/// Which collision operator drives the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollisionCase {
    /// `L f = ∇·(M ∇(f/M))`.
    FokkerPlanck,
    /// `L f = ∫ σ(v,v′)(f(v′)M(v) − f(v)M(v′)) dv′`.
    Scattering,
}

impl CollisionCase {
    pub fn letter(self) -> char {
        match self {
            CollisionCase::FokkerPlanck => 'a',
            CollisionCase::Scattering => 'b',
        }
    }
}

/// Unnormalized radial profile `p(|v|)`.
#[derive(Clone)]
pub struct RadialProfile {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RadialProfile {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    /// `e^{−r}`.
    pub fn exponential() -> Self {
        Self::new("exponential", |r| (-r).exp())
    }

    /// `e^{−√(1+r²)}`, smooth at the origin.
    pub fn smooth_exponential() -> Self {
        Self::new("smooth-exponential", |r: f64| (-(1.0 + r * r).sqrt()).exp())
    }

    /// `e^{−r⁴/4}`.
    pub fn quartic() -> Self {
        Self::new("quartic", |r: f64| (-0.25 * r.powi(4)).exp())
    }

    /// `(1+r²)^{−1}`: not exponentially dominated, rejected by [`build_equilibrium`].
    pub fn lorentzian() -> Self {
        Self::new("lorentzian", |r: f64| 1.0 / (1.0 + r * r))
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "exponential" => Some(Self::exponential()),
            "smooth-exponential" => Some(Self::smooth_exponential()),
            "quartic" => Some(Self::quartic()),
            "lorentzian" => Some(Self::lorentzian()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialProfile({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Equilibrium {
    GaussianNormalized,
    CustomRadial { profile: RadialProfile, c1: f64, c2: f64 },
}

/// A scattering rate `σ(v, v′)`.
#[derive(Clone)]
pub struct KernelFn {
    name: String,
    f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl KernelFn {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, v: &[f64], w: &[f64]) -> f64 {
        (self.f)(v, w)
    }
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelFn({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Kernel {
    ConstantOne,
    Bounded { sigma: KernelFn, sigma_bar: f64 },
}

impl Kernel {
    /// `σ(v,v′) = 1 + amp·sin(v₁)sin(v′₁)`, symmetric.
    pub fn sin_product(amp: f64) -> Self {
        Kernel::Bounded {
            sigma: KernelFn::new(format!("sin-product({amp})"), move |v, w| {
                1.0 + amp * v[0].sin() * w[0].sin()
            }),
            sigma_bar: 1.0 + amp.abs(),
        }
    }

    /// `σ(v,v′) = 1 + amp·1_{v₁>0}`, violates (H3).
    pub fn half_indicator(amp: f64) -> Self {
        Kernel::Bounded {
            sigma: KernelFn::new(format!("half-indicator({amp})"), move |v, _| {
                if v[0] > 0.0 {
                    1.0 + amp
                } else {
                    1.0
                }
            }),
            sigma_bar: 1.0 + amp.abs(),
        }
    }

    /// `σ(v,v′) = 1 + amp·e^{−|v−v′|²/2}`, symmetric.
    pub fn gaussian_bump(amp: f64) -> Self {
        Kernel::Bounded {
            sigma: KernelFn::new(format!("gaussian-bump({amp})"), move |v, w| {
                let r2: f64 = v.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
                1.0 + amp * (-0.5 * r2).exp()
            }),
            sigma_bar: 1.0 + amp.abs(),
        }
    }

    pub fn named(name: &str, amp: f64) -> Option<Self> {
        match name {
            "constant-one" => Some(Kernel::ConstantOne),
            "sin-product" => Some(Self::sin_product(amp)),
            "half-indicator" => Some(Self::half_indicator(amp)),
            "gaussian-bump" => Some(Self::gaussian_bump(amp)),
            _ => None,
        }
    }

    pub fn sigma_bar(&self) -> f64 {
        match self {
            Kernel::ConstantOne => 1.0,
            Kernel::Bounded { sigma_bar, .. } => *sigma_bar,
        }
    }

    pub fn eval(&self, v: &[f64], w: &[f64]) -> f64 {
        match self {
            Kernel::ConstantOne => 1.0,
            Kernel::Bounded { sigma, .. } => sigma.eval(v, w),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, Kernel::ConstantOne)
    }

    pub fn name(&self) -> &str {
        match self {
            Kernel::ConstantOne => "constant-one",
            Kernel::Bounded { sigma, .. } => sigma.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub case: CollisionCase,
    pub d: usize,
    pub equilibrium: Equilibrium,
    /// Ignored in the Fokker–Planck case.
    pub kernel: Kernel,
}

impl ModelSpec {
    pub fn fokker_planck(d: usize) -> Self {
        Self {
            case: CollisionCase::FokkerPlanck,
            d,
            equilibrium: Equilibrium::GaussianNormalized,
            kernel: Kernel::ConstantOne,
        }
    }

    pub fn bgk(d: usize) -> Self {
        Self {
            case: CollisionCase::Scattering,
            d,
            equilibrium: Equilibrium::GaussianNormalized,
            kernel: Kernel::ConstantOne,
        }
    }

    pub fn with_equilibrium(mut self, equilibrium: Equilibrium) -> Self {
        self.equilibrium = equilibrium;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.equilibrium, Equilibrium::GaussianNormalized)
    }
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    // |S^{d-1}| = 2π^{d/2}/Γ(d/2), with Γ(d/2) by the half-integer recursion.
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

/// A normalized equilibrium `M` with its domination constants.
#[derive(Debug, Clone)]
pub struct EquilibriumEval {
    pub d: usize,
    kind: Equilibrium,
    /// `1/Z` where `Z = ∫ p(|v|) dv`.
    pub normalization: f64,
    pub c1: f64,
    pub c2: f64,
    /// Radius beyond which `M < 1e-14`.
    pub v_max: f64,
}

impl EquilibriumEval {
    pub fn radial(&self, r: f64) -> f64 {
        match &self.kind {
            Equilibrium::GaussianNormalized => self.normalization * (-0.5 * r * r).exp(),
            Equilibrium::CustomRadial { profile, .. } => self.normalization * profile.eval(r),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.radial(v.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, Equilibrium::GaussianNormalized)
    }

    /// Radial derivative of `√M`, exact for the Gaussian and by central
    /// differences otherwise.
    pub fn sqrt_derivative(&self, r: f64) -> f64 {
        if self.is_gaussian() {
            return -0.5 * r * self.radial(r).sqrt();
        }
        let h = 1e-5 * r.max(1.0);
        let lo = (r - h).max(0.0);
        let hi = r + h;
        (self.radial(hi).sqrt() - self.radial(lo).sqrt()) / (hi - lo)
    }
}

const RADIAL_PANEL: f64 = 0.25;

/// `|S^{d−1}| ∫₀^R g(r) r^{d−1} dr` by composite Gauss–Legendre.
fn radial_integral(d: usize, r_max: f64, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(16);
    let s: f64 = rule
        .composite(0.0, r_max, panels)
        .iter()
        .map(|&(r, w)| w * g(r) * r.powi(d as i32 - 1))
        .sum();
    sphere_area(d) * s
}

/// Normalize the equilibrium and check positivity and exponential domination.
pub fn build_equilibrium(spec: &ModelSpec) -> Result<EquilibriumEval> {
    if spec.d == 0 {
        return Err(Error::InvalidModel("dimension must be positive".into()));
    }
    let d = spec.d;
    match &spec.equilibrium {
        Equilibrium::GaussianNormalized => {
            let normalization = (2.0 * PI).powf(-(d as f64) / 2.0);
            let v_max = (2.0 * (normalization / 1e-15).ln()).sqrt();
            Ok(EquilibriumEval {
                d,
                kind: spec.equilibrium.clone(),
                normalization,
                c1: normalization * 0.5f64.exp(),
                c2: 1.0,
                v_max,
            })
        }
        Equilibrium::CustomRadial { profile, c1, c2 } => {
            if !(*c1 > 0.0 && *c2 > 0.0) {
                return Err(Error::InvalidModel("domination constants must be positive".into()));
            }
            let p0 = profile.eval(0.0);
            if !p0.is_finite() || p0 <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "profile '{}' must be positive and finite at the origin",
                    profile.name()
                )));
            }
            // Find a radius where the profile is negligible.
            let mut r_cut = None;
            let mut r = 1.0;
            while r <= 4096.0 {
                let p = profile.eval(r);
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "profile '{}' is negative or undefined at r = {r}",
                        profile.name()
                    )));
                }
                if p <= 1e-18 * p0 {
                    r_cut = Some(r);
                    break;
                }
                r *= 1.25;
            }
            let r_cut = r_cut.ok_or_else(|| {
                Error::InvalidModel(format!(
                    "profile '{}' is not integrable with exponential decay",
                    profile.name()
                ))
            })?;
            let panels = (r_cut / RADIAL_PANEL).ceil() as usize;
            let z = radial_integral(d, r_cut, panels, |r| profile.eval(r));
            let z2 = radial_integral(d, r_cut, 2 * panels, |r| profile.eval(r));
            if ((z - z2) / z2).abs() > 1e-8 {
                return Err(Error::Quadrature { what: "normalization".into(), change: (z - z2).abs() / z2 });
            }
            let normalization = 1.0 / z2;
            // Positivity and domination on a radial node set.
            let rule = GaussLegendre::new(16);
            for (r, _) in rule.composite(0.0, r_cut, panels) {
                let m = normalization * profile.eval(r);
                if !(m >= 0.0) {
                    return Err(Error::InvalidModel(format!("negative profile value at r = {r:.4}")));
                }
                if m > c1 * (-c2 * r).exp() * (1.0 + 1e-10) {
                    return Err(Error::InvalidModel(format!(
                        "profile '{}' exceeds c1·exp(−c2|v|) at r = {r:.4}",
                        profile.name()
                    )));
                }
            }
            let mut v_max = 1.0;
            while normalization * profile.eval(v_max) >= 1e-14 {
                v_max += 0.125;
            }
            Ok(EquilibriumEval {
                d,
                kind: spec.equilibrium.clone(),
                normalization,
                c1: *c1,
                c2: *c2,
                v_max,
            })
        }
    }
}

/// Weight `γ_k(v) = (1+|v|²)^{k/2}`, or `γ_∞ = 1/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Weight {
    Polynomial(f64),
    InverseEquilibrium,
}

impl Weight {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Weight::Polynomial(k) if *k <= d as f64 => Err(Error::InvalidModel(format!(
                "weight order k = {k} must exceed d = {d} so that 1/γ_k is integrable"
            ))),
            _ => Ok(()),
        }
    }

    pub fn order(&self) -> f64 {
        match self {
            Weight::Polynomial(k) => *k,
            Weight::InverseEquilibrium => f64::INFINITY,
        }
    }

    pub fn eval(&self, v: &[f64], m: &EquilibriumEval) -> f64 {
        match self {
            Weight::Polynomial(k) => {
                (1.0 + v.iter().map(|x| x * x).sum::<f64>()).powf(0.5 * k)
            }
            Weight::InverseEquilibrium => 1.0 / m.eval(v),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Polynomial(k) => format!("gamma_{k}"),
            Weight::InverseEquilibrium => "gamma_inf".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LambdaSource {
    /// Known optimal constant.
    Exact,
    /// Smallest nonzero eigenvalue of the discretized operator.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    #[serde(rename = "Theta")]
    pub theta_big: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub theta: f64,
    pub kappa: f64,
    pub lambda_m: f64,
    pub lambda_m_source: LambdaSource,
    pub sigma_bar: f64,
}

impl Moments {
    /// Build from explicit constants, checking the admissibility relations.
    pub fn new(theta_big: f64, k: f64, theta: f64, kappa: f64, lambda_m: f64, sigma_bar: f64) -> Result<Self> {
        for (name, x) in [("Theta", theta_big), ("K", k), ("theta", theta), ("kappa", kappa), ("lambda_m", lambda_m)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::NonPositive(format!("{name} = {x}")));
            }
        }
        if k < theta_big * theta_big * (1.0 - 1e-12) {
            return Err(Error::InvalidModel(format!("K = {k} < Theta^2 = {}", theta_big * theta_big)));
        }
        Ok(Self { theta_big, k, theta, kappa, lambda_m, lambda_m_source: LambdaSource::Exact, sigma_bar })
    }
}

/// Quadrature resolution used for moments and hypothesis checks.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub hermite_nodes: usize,
    pub radial_panels: usize,
    /// Grid size for the λ_m estimate of custom Fokker–Planck models.
    pub grid_points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { hermite_nodes: 24, radial_panels: 0, grid_points: 96 }
    }
}

fn check_refinement(what: &str, coarse: f64, fine: f64, tol: f64) -> Result<f64> {
    let change = ((coarse - fine) / fine).abs();
    if change > tol {
        Err(Error::Quadrature { what: what.into(), change })
    } else {
        Ok(fine)
    }
}

/// Θ, K, θ by directional quadrature, with κ and λ_m per case.
pub fn compute_moments(spec: &ModelSpec, eq: &EquilibriumEval, quad: &QuadratureConfig) -> Result<Moments> {
    let d = spec.d;
    let (theta_big, k, theta) = if eq.is_gaussian() {
        let stats = |n: usize| {
            let q = GaussHermite::new(n);
            (q.expect(|x| x * x), q.expect(|x| x.powi(4)))
        };
        let (t1, k1) = stats(quad.hermite_nodes);
        let (t2, k2) = stats(2 * quad.hermite_nodes);
        let t = check_refinement("Theta", t1, t2, 1e-8)?;
        let k = check_refinement("K", k1, k2, 1e-8)?;
        // |∇√M|² = |v|²M/4, so θ = (4/d)·E|v|²/4 = E[v₁²].
        (t, k, t)
    } else {
        let panels = if quad.radial_panels > 0 {
            quad.radial_panels
        } else {
            (eq.v_max / RADIAL_PANEL).ceil() as usize
        };
        let r_max = eq.v_max * 1.5;
        let eval = |panels: usize| {
            let m2 = radial_integral(d, r_max, panels, |r| r * r * eq.radial(r));
            let m4 = radial_integral(d, r_max, panels, |r| r.powi(4) * eq.radial(r));
            let g = radial_integral(d, r_max, panels, |r| eq.sqrt_derivative(r).powi(2));
            let df = d as f64;
            (m2 / df, 3.0 * m4 / (df * (df + 2.0)), 4.0 * g / df)
        };
        let (t1, k1, g1) = eval(panels);
        let (t2, k2, g2) = eval(2 * panels);
        (
            check_refinement("Theta", t1, t2, 1e-8)?,
            check_refinement("K", k1, k2, 1e-8)?,
            check_refinement("theta", g1, g2, 1e-6)?,
        )
    };
    let sigma_bar = match spec.case {
        CollisionCase::FokkerPlanck => 0.5 * (theta / theta_big).sqrt(),
        CollisionCase::Scattering => spec.kernel.sigma_bar(),
    };
    let kappa = match spec.case {
        CollisionCase::FokkerPlanck => theta.sqrt(),
        CollisionCase::Scattering => 2.0 * sigma_bar * theta_big.sqrt(),
    };
    let (lambda_m, source) = match (spec.case, eq.is_gaussian()) {
        (CollisionCase::FokkerPlanck, false) => {
            let basis = crate::basis::VelocityBasis::grid(spec, eq, eq.v_max, quad.grid_points)?;
            let l = crate::operators::assemble_collision(spec, &basis)?;
            let est = crate::operators::smallest_nonzero_eigenvalue(&l, &basis)?;
            (est, LambdaSource::Estimated)
        }
        _ => (1.0, LambdaSource::Exact),
    };
    let mut m = Moments::new(theta_big, k, theta, kappa, lambda_m, sigma_bar)?;
    m.lambda_m_source = source;
    Ok(m)
}

/// An admitted model: spec, normalized equilibrium and moment constants.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub equilibrium: EquilibriumEval,
    pub moments: Moments,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        Self::with_quadrature(spec, &QuadratureConfig::default())
    }

    pub fn with_quadrature(spec: ModelSpec, quad: &QuadratureConfig) -> Result<Self> {
        let equilibrium = build_equilibrium(&spec)?;
        let moments = compute_moments(&spec, &equilibrium, quad)?;
        Ok(Self { spec, equilibrium, moments })
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tensor trapezoid nodes on `[−V, V]^d` with weights.
fn check_nodes(d: usize, v_max: f64, per_dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, w) = trapezoid(v_max, per_dim);
    let mut nodes = vec![vec![]];
    let mut weights = vec![1.0];
    for _ in 0..d {
        let mut nn = Vec::new();
        let mut nw = Vec::new();
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

/// Evaluate (H1)–(H3) on quadrature nodes. Never fails; the report carries failures.
pub fn check_hypotheses(spec: &ModelSpec) -> HypothesisReport {
    let mut checks = Vec::new();
    let eq = match build_equilibrium(spec) {
        Ok(eq) => eq,
        Err(e) => {
            checks.push(HypothesisCheck {
                name: "H1".into(),
                passed: false,
                residual: f64::NAN,
                detail: e.to_string(),
            });
            return HypothesisReport { checks };
        }
    };
    let per_dim = if spec.d == 1 { 401 } else { 61 };
    let (nodes, weights) = check_nodes(spec.d, eq.v_max, per_dim);
    let m: Vec<f64> = nodes.iter().map(|v| eq.eval(v)).collect();

    // (H1): mass one, positivity, domination, finite gradient moment.
    let mass = if eq.is_gaussian() {
        let q = GaussHermite::new(16);
        q.expect(|_| 1.0).powi(spec.d as i32)
    } else {
        m.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
    };
    let tol = if eq.is_gaussian() { 1e-10 } else { 1e-8 };
    let positive = m.iter().all(|&x| x > 0.0 || x == 0.0 && !eq.is_gaussian());
    let dominated = nodes
        .iter()
        .zip(&m)
        .all(|(v, &x)| x <= eq.c1 * (-eq.c2 * v.iter().map(|a| a * a).sum::<f64>().sqrt()).exp() * (1.0 + 1e-10));
    let grad_ok = compute_moments(spec, &eq, &QuadratureConfig { grid_points: 32, ..Default::default() })
        .map(|mm| mm.theta.is_finite())
        .unwrap_or(false);
    let h1_res = (mass - 1.0).abs();
    checks.push(HypothesisCheck {
        name: "H1".into(),
        passed: h1_res < tol && positive && dominated && grad_ok,
        residual: h1_res,
        detail: format!("mass={mass:.12}, positive={positive}, dominated={dominated}, gradient={grad_ok}"),
    });

    if spec.d <= 2 {
        // Sampled radiality: compare M along rotated directions.
        let mut worst: f64 = 0.0;
        for j in 0..16 {
            let r = 0.37 * j as f64;
            let base = if spec.d == 1 { vec![r] } else { vec![r, 0.0] };
            let turned = if spec.d == 1 {
                vec![-r]
            } else {
                let a = 0.3 + j as f64;
                vec![r * a.cos(), r * a.sin()]
            };
            worst = worst.max((eq.eval(&base) - eq.eval(&turned)).abs());
        }
        checks.push(HypothesisCheck {
            name: "radial".into(),
            passed: worst < 1e-14,
            residual: worst,
            detail: "sampled rotations".into(),
        });
    }

    if spec.case == CollisionCase::Scattering {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut h3: f64 = 0.0;
        for (i, v) in nodes.iter().enumerate() {
            let mut defect = 0.0;
            for (j, w) in nodes.iter().enumerate() {
                let s_vw = spec.kernel.eval(v, w);
                let s_wv = spec.kernel.eval(w, v);
                lo = lo.min(s_vw);
                hi = hi.max(s_vw);
                defect += weights[j] * m[j] * (s_vw - s_wv);
            }
            let _ = i;
            h3 = h3.max(defect.abs());
        }
        let sb = spec.kernel.sigma_bar();
        checks.push(HypothesisCheck {
            name: "H2".into(),
            passed: lo >= 1.0 - 1e-12 && hi <= sb + 1e-12,
            residual: (1.0 - lo).max(hi - sb).max(0.0),
            detail: format!("sigma in [{lo:.6}, {hi:.6}], sigma_bar={sb}"),
        });
        checks.push(HypothesisCheck {
            name: "H3".into(),
            passed: h3 < 1e-8,
            residual: h3,
            detail: "max_v |∫(σ(v,v′)−σ(v′,v))M(v′)dv′|".into(),
        });
    }
    HypothesisReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak_value() {
        let eq = build_equilibrium(&ModelSpec::fokker_planck(1)).unwrap();
        assert!((eq.eval(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(eq.radial(eq.v_max) < 1e-14);
    }

    #[test]
    fn exponential_profile_normalization_is_one_half() {
        let spec = ModelSpec::bgk(1).with_equilibrium(Equilibrium::CustomRadial {
            profile: RadialProfile::exponential(),
            c1: 0.5,
            c2: 1.0,
        });
        let eq = build_equilibrium(&spec).unwrap();
        assert!((eq.normalization - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_profile_moments() {
        let spec = ModelSpec::bgk(1).with_equilibrium(Equilibrium::CustomRadial {
            profile: RadialProfile::exponential(),
            c1: 0.5,
            c2: 1.0,
        });
        let model = Model::new(spec).unwrap();
        // Laplace distribution: E v² = 2, E v⁴ = 24, (4/d)∫(√M)'² = 1.
        assert!((model.moments.theta_big - 2.0).abs() < 1e-10);
        assert!((model.moments.k - 24.0).abs() < 1e-9);
        assert!((model.moments.theta - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lorentzian_is_rejected() {
        let spec = ModelSpec::bgk(1).with_equilibrium(Equilibrium::CustomRadial {
            profile: RadialProfile::lorentzian(),
            c1: 1.0,
            c2: 1.0,
        });
        assert!(build_equilibrium(&spec).is_err());
    }

    #[test]
    fn negative_profile_is_rejected() {
        let spec = ModelSpec::bgk(1).with_equilibrium(Equilibrium::CustomRadial {
            profile: RadialProfile::new("bad", |r: f64| (-r).exp() * (1.5 - r)),
            c1: 10.0,
            c2: 0.5,
        });
        assert!(build_equilibrium(&spec).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn weight_order_must_exceed_dimension() {
        assert!(Weight::Polynomial(1.0).validate(1).is_err());
        assert!(Weight::Polynomial(2.0).validate(1).is_ok());
        assert!(Weight::InverseEquilibrium.validate(3).is_ok());
    }
}
