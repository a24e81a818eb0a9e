//! Matrices for the collision operator `L`, transport `T(ξ)`, projection `Π`
//! and the auxiliary operator `A(ξ)` in orthonormal velocity coordinates.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{BasisKind, VelocityBasis};
use crate::error::{Error, Result};
use crate::linalg::{to_complex, CMat, CVec, I};
use crate::model::{CollisionCase, Model, ModelSpec, Moments};
use crate::quadrature::{hermite_orthonormal, GaussHermite};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OperatorTag {
    Collision,
    Transport(Vec<f64>),
    Projection,
    Auxiliary(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub tag: OperatorTag,
    pub matrix: CMat,
}

impl OperatorMatrix {
    pub fn apply(&self, c: &CVec) -> CVec {
        &self.matrix * c
    }

    /// Dump nonzero entries as `row,col,re,im`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "row,col,re,im")?;
        for j in 0..self.matrix.ncols() {
            for i in 0..self.matrix.nrows() {
                let z = self.matrix[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    writeln!(out, "{i},{j},{:e},{:e}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

/// `L` as a real matrix.
pub fn collision_matrix(spec: &ModelSpec, basis: &VelocityBasis) -> Result<DMatrix<f64>> {
    if basis.d != spec.d {
        return Err(Error::Dimension { expected: spec.d, got: basis.d });
    }
    match (basis.kind, spec.case) {
        (BasisKind::HermiteSpectral { .. }, _) if !spec.is_gaussian() => Err(Error::BasisMismatch(
            "the Hermite basis requires the normalized Gaussian equilibrium".into(),
        )),
        (BasisKind::HermiteSpectral { .. }, CollisionCase::FokkerPlanck) => {
            let n = basis.size();
            Ok(DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| {
                -(basis.multi_index(k).iter().sum::<usize>() as f64)
            })))
        }
        (BasisKind::HermiteSpectral { n: per }, CollisionCase::Scattering) => {
            let n = basis.size();
            if spec.kernel.is_constant_one() {
                let mut l = -DMatrix::identity(n, n);
                l[(0, 0)] = 0.0;
                return Ok(l);
            }
            hermite_scattering(spec, basis, per).map(|(gain, loss)| gain - loss)
        }
        (BasisKind::Grid { .. }, CollisionCase::Scattering) => {
            let (gain, loss) = grid_scattering(spec, basis);
            Ok(gain - loss)
        }
        (BasisKind::Grid { .. }, CollisionCase::FokkerPlanck) => Ok(grid_fokker_planck(basis)),
    }
}

fn hermite_scattering(spec: &ModelSpec, basis: &VelocityBasis, per: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let q = (2 * per + 16).max(48);
    let rule = GaussHermite::new(q);
    // Tensor nodes with h-values.
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
    for _ in 0..spec.d {
        let mut next = Vec::new();
        for (p, pw) in &pts {
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let mut v = p.clone();
                v.push(*x);
                next.push((v, pw * w));
            }
        }
        pts = next;
    }
    let n = basis.size();
    let h = DMatrix::from_fn(n, pts.len(), |k, a| {
        let idx = basis.multi_index(k);
        idx.iter()
            .enumerate()
            .map(|(j, &i)| hermite_orthonormal(i + 1, pts[a].0[j])[i])
            .product::<f64>()
    });
    let w = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sigma = DMatrix::from_fn(pts.len(), pts.len(), |a, b| spec.kernel.eval(&pts[a].0, &pts[b].0));
    // Loss uses ∫σ(v′,v)M(v′)dv′ so that the discrete mass is exactly conserved.
    let nu_prime = sigma.transpose() * &w;
    let hw = DMatrix::from_fn(n, pts.len(), |k, a| h[(k, a)] * w[a]);
    let gain = &hw * &sigma * hw.transpose();
    let hwn = DMatrix::from_fn(n, pts.len(), |k, a| hw[(k, a)] * nu_prime[a]);
    let loss = &hwn * h.transpose();
    Ok((gain, loss))
}

fn grid_scattering(spec: &ModelSpec, basis: &VelocityBasis) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = basis.size();
    let s: Vec<f64> = basis.weights.iter().zip(&basis.m_nodes).map(|(w, m)| (w * m).sqrt()).collect();
    let sigma = DMatrix::from_fn(n, n, |i, j| spec.kernel.eval(&basis.nodes[i], &basis.nodes[j]));
    let gain = DMatrix::from_fn(n, n, |i, j| sigma[(i, j)] * s[i] * s[j]);
    let loss = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
        (0..n).map(|k| basis.weights[k] * sigma[(k, i)] * basis.m_nodes[k]).sum::<f64>()
    }));
    (gain, loss)
}

/// Gain part `F ↦ M∫σ(·,v′)F(v′)dv′` of a scattering operator.
pub fn scattering_gain(spec: &ModelSpec, basis: &VelocityBasis) -> Result<DMatrix<f64>> {
    if spec.case != CollisionCase::Scattering {
        return Err(Error::InvalidModel("the gain split applies to scattering operators".into()));
    }
    match basis.kind {
        BasisKind::HermiteSpectral { .. } if !spec.is_gaussian() => Err(Error::BasisMismatch(
            "the Hermite basis requires the normalized Gaussian equilibrium".into(),
        )),
        BasisKind::HermiteSpectral { .. } if spec.kernel.is_constant_one() => {
            let e = &basis.equilibrium;
            Ok(e * e.transpose())
        }
        BasisKind::HermiteSpectral { n: per } => hermite_scattering(spec, basis, per).map(|(gain, _)| gain),
        BasisKind::Grid { .. } => Ok(grid_scattering(spec, basis).0),
    }
}

/// Finite-volume `∇·(M∇(f/M))` with face fluxes `M_{k+½}(u_{k+1} − u_k)/h`.
fn grid_fokker_planck(basis: &VelocityBasis) -> DMatrix<f64> {
    let n = basis.size();
    let h = basis.spacing;
    let per = basis.shape[0];
    let s: Vec<f64> = basis.weights.iter().zip(&basis.m_nodes).map(|(w, m)| (w * m).sqrt()).collect();
    let one_d = |i: usize| if i == 0 || i == per - 1 { 0.5 * h } else { h };
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let idx = basis.multi_index(k);
        for j in 0..basis.d {
            if idx[j] + 1 >= per {
                continue;
            }
            let mut up = idx.clone();
            up[j] += 1;
            let kk = basis.flat_index(&up);
            let transverse = basis.weights[k] / one_d(idx[j]);
            let m_half = (basis.m_nodes[k] * basis.m_nodes[kk]).sqrt();
            let c = transverse * m_half / h;
            stiff[(k, kk)] += c;
            stiff[(kk, k)] += c;
            stiff[(k, k)] -= c;
            stiff[(kk, kk)] -= c;
        }
    }
    DMatrix::from_fn(n, n, |i, j| stiff[(i, j)] / (s[i] * s[j]))
}

pub fn assemble_collision(spec: &ModelSpec, basis: &VelocityBasis) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix { tag: OperatorTag::Collision, matrix: to_complex(&collision_matrix(spec, basis)?) })
}

/// Real matrix of `v·ξ`; transport is `i` times this.
pub fn velocity_dot(xi: &[f64], basis: &VelocityBasis) -> DMatrix<f64> {
    let n = basis.size();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (j, x) in xi.iter().enumerate() {
        if *x != 0.0 {
            m += &basis.velocity[j] * *x;
        }
    }
    m
}

pub fn assemble_transport(xi: &[f64], basis: &VelocityBasis) -> Result<OperatorMatrix> {
    if xi.len() != basis.d {
        return Err(Error::Dimension { expected: basis.d, got: xi.len() });
    }
    Ok(OperatorMatrix {
        tag: OperatorTag::Transport(xi.to_vec()),
        matrix: velocity_dot(xi, basis).map(|x| I * x),
    })
}

pub fn assemble_projection(basis: &VelocityBasis) -> OperatorMatrix {
    let e = &basis.equilibrium;
    OperatorMatrix { tag: OperatorTag::Projection, matrix: to_complex(&(e * e.transpose())) }
}

pub fn assemble_auxiliary(xi: &[f64], moments: &Moments, basis: &VelocityBasis) -> Result<OperatorMatrix> {
    if xi.len() != basis.d {
        return Err(Error::Dimension { expected: basis.d, got: xi.len() });
    }
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let mut flux = DVector::<f64>::zeros(basis.size());
    for (j, x) in xi.iter().enumerate() {
        flux += basis.flux(j) * *x;
    }
    let scale = -I / (1.0 + moments.theta_big * xi2);
    let outer = &basis.equilibrium * flux.transpose();
    Ok(OperatorMatrix { tag: OperatorTag::Auxiliary(xi.to_vec()), matrix: outer.map(|x| scale * x) })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoercivityEstimate {
    pub sample_min: f64,
    pub spectral: Option<f64>,
    pub estimate: f64,
}

/// Smallest eigenvalue of `−½(L+Lᵀ)` on the orthogonal complement of `M`.
pub fn smallest_nonzero_eigenvalue(l: &OperatorMatrix, basis: &VelocityBasis) -> Result<f64> {
    let re = l.matrix.map(|z| z.re);
    let sym = (&re + re.transpose()) * -0.5;
    let e = &basis.equilibrium;
    let shift = 10.0 * (1.0 + sym.abs().max() * basis.size() as f64);
    let deflated = sym + e * e.transpose() * shift;
    let eig = SymmetricEigen::new(deflated);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Coercivity(min));
    }
    Ok(min)
}

/// Lower bound on `⟨−Lf,f⟩/‖(1−Π)f‖²` from random samples and, when `L` is
/// symmetric, the spectrum.
pub fn estimate_coercivity(l: &OperatorMatrix, basis: &VelocityBasis, samples: usize, seed: u64) -> Result<CoercivityEstimate> {
    let n = basis.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = basis.equilibrium.map(|x| Complex64::new(x, 0.0));
    let mut sample_min = f64::INFINITY;
    for _ in 0..samples {
        let c = CVec::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = e.dotc(&c);
        let micro = &c - &e * rho;
        let denom = micro.norm_squared();
        if denom < 1e-24 {
            continue;
        }
        let q = -c.dotc(&l.apply(&c)).re / denom;
        sample_min = sample_min.min(q);
    }
    let asym = (&l.matrix - l.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let spectral = if asym < 1e-10 { Some(smallest_nonzero_eigenvalue(l, basis)?) } else { None };
    let estimate = spectral.map_or(sample_min, |s| s.min(sample_min));
    if !(estimate > 0.0) {
        return Err(Error::Coercivity(estimate));
    }
    Ok(CoercivityEstimate { sample_min, spectral, estimate })
}

/// Model, basis and collision matrix bundled for mode solves.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub model: Model,
    pub basis: VelocityBasis,
    pub collision: DMatrix<f64>,
}

impl Discretization {
    pub fn new(model: Model, basis: VelocityBasis) -> Result<Self> {
        let collision = collision_matrix(&model.spec, &basis)?;
        Ok(Self { model, basis, collision })
    }

    /// Hermite basis for Gaussian models, grid otherwise.
    pub fn default_for(model: Model, n: usize) -> Result<Self> {
        let basis = if model.spec.is_gaussian() {
            VelocityBasis::hermite(model.d(), n)?
        } else {
            VelocityBasis::default_grid(&model.spec, &model.equilibrium, n)?
        };
        Self::new(model, basis)
    }

    pub fn size(&self) -> usize {
        self.basis.size()
    }

    /// `L − T(ξ) = L − i(v·ξ)`.
    pub fn generator(&self, xi: &[f64]) -> CMat {
        let vx = velocity_dot(xi, &self.basis);
        CMat::from_fn(self.size(), self.size(), |i, j| Complex64::new(self.collision[(i, j)], -vx[(i, j)]))
    }

    pub fn auxiliary(&self, xi: &[f64]) -> Result<OperatorMatrix> {
        assemble_auxiliary(xi, &self.model.moments, &self.basis)
    }

    pub fn equilibrium(&self) -> CVec {
        self.basis.equilibrium.map(|x| Complex64::new(x, 0.0))
    }
}

/// Residuals of the structural identities on one assembled set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StructureReport {
    pub mass_conservation: f64,
    pub equilibrium_kernel: f64,
    pub self_adjointness: f64,
    pub transport_skewness: f64,
    pub projection_idempotence: f64,
    pub projection_orthogonality: f64,
}

pub fn structure_report(disc: &Discretization, xi: &[f64]) -> Result<StructureReport> {
    let l = &disc.collision;
    let e = &disc.basis.equilibrium;
    let mass_conservation = (l.transpose() * e).amax();
    let equilibrium_kernel = (l * e).amax();
    let self_adjointness = (l - l.transpose()).amax();
    let t = assemble_transport(xi, &disc.basis)?.matrix;
    let transport_skewness = (&t + t.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let p = assemble_projection(&disc.basis).matrix;
    let projection_idempotence = crate::linalg::max_abs_diff(&(&p * &p), &p);
    let n = disc.size();
    let q = CMat::identity(n, n) - &p;
    let projection_orthogonality = (p.adjoint() * q).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(StructureReport {
        mass_conservation,
        equilibrium_kernel,
        self_adjointness,
        transport_skewness,
        projection_idempotence,
        projection_orthogonality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_equilibrium, Kernel};

    #[test]
    fn hermite_fokker_planck_spectrum() {
        let spec = ModelSpec::fokker_planck(1);
        let b = VelocityBasis::hermite(1, 12).unwrap();
        let l = collision_matrix(&spec, &b).unwrap();
        for k in 0..12 {
            assert_eq!(l[(k, k)], -(k as f64));
        }
    }

    #[test]
    fn general_kernel_reduces_to_bgk() {
        let spec = ModelSpec::bgk(1).with_kernel(Kernel::sin_product(0.0));
        let b = VelocityBasis::hermite(1, 10).unwrap();
        let l = collision_matrix(&spec, &b).unwrap();
        let mut want = -DMatrix::<f64>::identity(10, 10);
        want[(0, 0)] = 0.0;
        assert!((l - want).amax() < 1e-12);
    }

    #[test]
    fn grid_bgk_kills_odd_functions() {
        let spec = ModelSpec::bgk(1);
        let eq = build_equilibrium(&spec).unwrap();
        let b = VelocityBasis::default_grid(&spec, &eq, 65).unwrap();
        let l = collision_matrix(&spec, &b).unwrap();
        let g = b.project(|v| v[0] * (-v[0] * v[0]).exp(), &eq);
        assert!((&l * &g + &g).amax() < 1e-13);
    }

    #[test]
    fn hermite_mismatch_is_rejected() {
        let spec = ModelSpec::bgk(1).with_equilibrium(crate::model::Equilibrium::CustomRadial {
            profile: crate::model::RadialProfile::exponential(),
            c1: 0.5,
            c2: 1.0,
        });
        let b = VelocityBasis::hermite(1, 8).unwrap();
        assert!(matches!(collision_matrix(&spec, &b), Err(Error::BasisMismatch(_))));
    }
}
