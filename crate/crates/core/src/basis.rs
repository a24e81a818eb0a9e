//! Velocity bases with coordinates orthonormal in `L²(dγ_∞) = L²(M⁻¹dv)`.
//!
//! In both bases a density `F` is stored as a coefficient vector `c` with
//! `‖F‖²_{L²(dγ_∞)} = |c|²`. Hermite coordinates are `c_n = ∫F h_n dv` with
//! `h_n` the orthonormal probabilists' Hermite polynomials; grid coordinates
//! are `c_j = F(v_j)√(w_j/M(v_j))`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::model::{EquilibriumEval, ModelSpec, Weight};
use crate::quadrature::{hermite_orthonormal, trapezoid, GaussHermite};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasisKind {
    HermiteSpectral { n: usize },
    Grid { v_max: f64, n: usize },
}

#[derive(Debug, Clone)]
pub struct VelocityBasis {
    pub kind: BasisKind,
    pub d: usize,
    /// Per-dimension extent.
    pub shape: Vec<usize>,
    /// Coordinates of the equilibrium `M`.
    pub equilibrium: DVector<f64>,
    /// Multiplication by `v_j`, symmetric in these coordinates.
    pub velocity: Vec<DMatrix<f64>>,
    /// Grid nodes (empty for Hermite).
    pub nodes: Vec<Vec<f64>>,
    /// Grid quadrature weights (empty for Hermite).
    pub weights: Vec<f64>,
    /// Renormalized `M` at grid nodes (empty for Hermite).
    pub m_nodes: Vec<f64>,
    /// Grid spacing (zero for Hermite).
    pub spacing: f64,
}

fn unflatten(mut k: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(shape.len());
    for &s in shape {
        out.push(k % s);
        k /= s;
    }
    out
}

fn flatten(idx: &[usize], shape: &[usize]) -> usize {
    let mut k = 0;
    for (i, &s) in idx.iter().zip(shape).rev() {
        k = k * s + i;
    }
    k
}

impl VelocityBasis {
    /// Tensor Hermite basis with `n` functions per dimension.
    pub fn hermite(d: usize, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidModel(format!("Hermite basis needs N ≥ 8, got {n}")));
        }
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        let shape = vec![n; d];
        let size = n.pow(d as u32);
        let mut equilibrium = DVector::zeros(size);
        equilibrium[0] = 1.0;
        let mut velocity = Vec::with_capacity(d);
        for j in 0..d {
            let mut jac = DMatrix::zeros(size, size);
            for k in 0..size {
                let idx = unflatten(k, &shape);
                if idx[j] + 1 < n {
                    let mut up = idx.clone();
                    up[j] += 1;
                    let kk = flatten(&up, &shape);
                    let val = ((idx[j] + 1) as f64).sqrt();
                    jac[(kk, k)] = val;
                    jac[(k, kk)] = val;
                }
            }
            velocity.push(jac);
        }
        Ok(Self {
            kind: BasisKind::HermiteSpectral { n },
            d,
            shape,
            equilibrium,
            velocity,
            nodes: vec![],
            weights: vec![],
            m_nodes: vec![],
            spacing: 0.0,
        })
    }

    /// Tensor trapezoid grid with `n` nodes per dimension on `[−v_max, v_max]`.
    pub fn grid(spec: &ModelSpec, eq: &EquilibriumEval, v_max: f64, n: usize) -> Result<Self> {
        if n < 3 || !(v_max > 0.0) {
            return Err(Error::InvalidModel(format!("grid needs n ≥ 3 and V_max > 0, got {n}, {v_max}")));
        }
        let d = spec.d;
        let (x, w) = trapezoid(v_max, n);
        let shape = vec![n; d];
        let size = n.pow(d as u32);
        let mut nodes = Vec::with_capacity(size);
        let mut weights = Vec::with_capacity(size);
        for k in 0..size {
            let idx = unflatten(k, &shape);
            nodes.push(idx.iter().map(|&i| x[i]).collect::<Vec<_>>());
            weights.push(idx.iter().map(|&i| w[i]).product::<f64>());
        }
        let raw: Vec<f64> = nodes.iter().map(|v| eq.eval(v)).collect();
        let mass: f64 = raw.iter().zip(&weights).map(|(m, w)| m * w).sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Resolution(format!(
                "grid integrates M to {mass:.12}; widen V_max or refine"
            )));
        }
        if raw.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidModel("M vanishes on the grid; reduce V_max".into()));
        }
        let m_nodes: Vec<f64> = raw.iter().map(|m| m / mass).collect();
        let equilibrium = DVector::from_iterator(size, m_nodes.iter().zip(&weights).map(|(m, w)| (m * w).sqrt()));
        let velocity = (0..d)
            .map(|j| DMatrix::from_diagonal(&DVector::from_iterator(size, nodes.iter().map(|v| v[j]))))
            .collect();
        Ok(Self {
            kind: BasisKind::Grid { v_max, n },
            d,
            shape,
            equilibrium,
            velocity,
            nodes,
            weights,
            m_nodes,
            spacing: x[1] - x[0],
        })
    }

    /// Grid whose extent is set by `M(V_max) < 1e-14`.
    pub fn default_grid(spec: &ModelSpec, eq: &EquilibriumEval, n: usize) -> Result<Self> {
        Self::grid(spec, eq, eq.v_max, n)
    }

    pub fn size(&self) -> usize {
        self.equilibrium.len()
    }

    pub fn is_hermite(&self) -> bool {
        matches!(self.kind, BasisKind::HermiteSpectral { .. })
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        unflatten(k, &self.shape)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        flatten(idx, &self.shape)
    }

    /// Vector `m_j` with `∫ v_j F dv = m_j · c`.
    pub fn flux(&self, j: usize) -> DVector<f64> {
        &self.velocity[j] * &self.equilibrium
    }

    /// `ρ = ∫ F dv`.
    pub fn mass(&self, c: &CVec) -> Complex64 {
        self.equilibrium.iter().zip(c.iter()).map(|(e, z)| z * *e).sum()
    }

    /// `∫ v_j F dv`.
    pub fn current(&self, c: &CVec, j: usize) -> Complex64 {
        self.flux(j).iter().zip(c.iter()).map(|(e, z)| z * *e).sum()
    }

    fn hermite_rule_size(&self) -> usize {
        match self.kind {
            BasisKind::HermiteSpectral { n } => (2 * n + 8).max(48),
            _ => 0,
        }
    }

    /// Tensor Gauss–Hermite rule as (node, weight) pairs.
    fn tensor_rule(&self, q: usize, scale: f64) -> Vec<(Vec<f64>, f64)> {
        let rule = GaussHermite::new(q);
        let mut out = vec![(vec![], 1.0)];
        for _ in 0..self.d {
            let mut next = Vec::with_capacity(out.len() * q);
            for (p, pw) in &out {
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let mut v = p.clone();
                    v.push(x * scale);
                    next.push((v, pw * w));
                }
            }
            out = next;
        }
        out
    }

    /// Values of all basis polynomials `h_n(v)` in flat order.
    fn hermite_values(&self, v: &[f64]) -> Vec<f64> {
        let n = self.shape[0];
        let per_dim: Vec<Vec<f64>> = v.iter().map(|&x| hermite_orthonormal(n, x)).collect();
        (0..self.size())
            .map(|k| {
                let idx = self.multi_index(k);
                idx.iter().enumerate().map(|(j, &i)| per_dim[j][i]).product()
            })
            .collect()
    }

    /// Coordinates of `F = u·M` given the ratio `u = F/M`.
    pub fn project_ratio(&self, u: impl Fn(&[f64]) -> f64, eq: &EquilibriumEval) -> DVector<f64> {
        match self.kind {
            BasisKind::HermiteSpectral { .. } => {
                let mut c = DVector::zeros(self.size());
                for (v, w) in self.tensor_rule(self.hermite_rule_size(), 1.0) {
                    let uv = u(&v);
                    let h = self.hermite_values(&v);
                    for (ck, hk) in c.iter_mut().zip(h) {
                        *ck += w * uv * hk;
                    }
                }
                c
            }
            BasisKind::Grid { .. } => {
                let _ = eq;
                DVector::from_iterator(
                    self.size(),
                    self.nodes
                        .iter()
                        .zip(&self.weights)
                        .zip(&self.m_nodes)
                        .map(|((v, w), m)| u(v) * (w * m).sqrt()),
                )
            }
        }
    }

    /// Coordinates of a density `F`.
    pub fn project(&self, f: impl Fn(&[f64]) -> f64, eq: &EquilibriumEval) -> DVector<f64> {
        match self.kind {
            BasisKind::HermiteSpectral { .. } => self.project_ratio(|v| f(v) / eq.eval(v), eq),
            BasisKind::Grid { .. } => DVector::from_iterator(
                self.size(),
                self.nodes
                    .iter()
                    .zip(&self.weights)
                    .zip(&self.m_nodes)
                    .map(|((v, w), m)| f(v) * (w / m).sqrt()),
            ),
        }
    }

    /// `F(v)` reconstructed from coordinates (Hermite: anywhere; grid: nodes only).
    pub fn evaluate(&self, c: &CVec, v: &[f64], eq: &EquilibriumEval) -> Complex64 {
        match self.kind {
            BasisKind::HermiteSpectral { .. } => {
                let h = self.hermite_values(v);
                let s: Complex64 = h.iter().zip(c.iter()).map(|(hk, ck)| ck * *hk).sum();
                s * eq.eval(v)
            }
            BasisKind::Grid { .. } => {
                let k = self
                    .nodes
                    .iter()
                    .position(|n| n.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-12))
                    .expect("grid bases evaluate at nodes only");
                c[k] * (self.m_nodes[k] / self.weights[k]).sqrt()
            }
        }
    }

    /// Nodal values `F(v_j)` of a grid coordinate vector.
    pub fn nodal_values(&self, c: &CVec) -> Vec<Complex64> {
        assert!(!self.is_hermite(), "nodal values need a grid basis");
        c.iter()
            .zip(&self.weights)
            .zip(&self.m_nodes)
            .map(|((z, w), m)| z * (m / w).sqrt())
            .collect()
    }

    /// Gram matrix `G` with `‖F‖²_{L²(dγ)} = c* G c`.
    pub fn weight_gram(&self, weight: &Weight, eq: &EquilibriumEval) -> DMatrix<f64> {
        let n = self.size();
        if let Weight::InverseEquilibrium = weight {
            return DMatrix::identity(n, n);
        }
        match self.kind {
            BasisKind::Grid { .. } => DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                self.nodes.iter().zip(&self.m_nodes).map(|(v, m)| m * weight.eval(v, eq)),
            )),
            BasisKind::HermiteSpectral { n: per } => {
                // ∫ g M² dv = (4π)^{−d/2} E[g(Z/√2)].
                let q = (2 * per + 60).min(240);
                let pref = (4.0 * std::f64::consts::PI).powf(-(self.d as f64) / 2.0);
                let mut g = DMatrix::zeros(n, n);
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                for (v, w) in self.tensor_rule(q, scale) {
                    let h = DVector::from_vec(self.hermite_values(&v));
                    let s = pref * w * weight.eval(&v, eq);
                    g.ger(s, &h, &h, 1.0);
                }
                g
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_equilibrium;

    #[test]
    fn hermite_projection_of_vm() {
        let eq = build_equilibrium(&ModelSpec::fokker_planck(1)).unwrap();
        let b = VelocityBasis::hermite(1, 10).unwrap();
        let c = b.project(|v| v[0] * eq.eval(v), &eq);
        assert!((c[1] - 1.0).abs() < 1e-13);
        assert!(c.iter().enumerate().all(|(k, x)| k == 1 || x.abs() < 1e-13));
    }

    #[test]
    fn grid_equilibrium_has_unit_norm() {
        let spec = ModelSpec::bgk(1);
        let eq = build_equilibrium(&spec).unwrap();
        let b = VelocityBasis::default_grid(&spec, &eq, 64).unwrap();
        assert!((b.equilibrium.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_weight_gram_constant_weight() {
        // With γ = 1: ∫ψ_mψ_n dv, e.g. ∫M² = (4π)^{-1/2}.
        let eq = build_equilibrium(&ModelSpec::fokker_planck(1)).unwrap();
        let b = VelocityBasis::hermite(1, 8).unwrap();
        let g = b.weight_gram(&Weight::Polynomial(0.0), &eq);
        assert!((g[(0, 0)] - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((&g - g.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn flat_index_round_trip() {
        let b = VelocityBasis::hermite(2, 8).unwrap();
        for k in 0..b.size() {
            assert_eq!(b.flat_index(&b.multi_index(k)), k);
        }
    }
}
