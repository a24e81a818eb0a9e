//! One-dimensional quadrature rules and the normalized Hermite polynomials.
//!
//! Gauss–Hermite rules here integrate against the standard normal density, so
//! the weights sum to one and `Σ wᵢ p(xᵢ) = E[p(Z)]` exactly for polynomials of
//! degree `< 2n`.

use nalgebra::{DMatrix, SymmetricEigen};

/// Values `h_0(x), …, h_{n-1}(x)` of the orthonormal probabilists' Hermite
/// polynomials `h_k = He_k / √k!`.
pub fn hermite_orthonormal(n: usize, x: f64) -> Vec<f64> {
    let mut h = vec![0.0; n];
    if n == 0 {
        return h;
    }
    h[0] = 1.0;
    if n > 1 {
        h[1] = x;
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        h[k + 1] = (x * h[k] - kf.sqrt() * h[k - 1]) / (kf + 1.0).sqrt();
    }
    h
}

/// Gauss–Hermite rule for the standard normal weight.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Hermite rule needs at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j {
                (j as f64).sqrt()
            } else if j + 1 == i {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Newton polish on h_n, then Christoffel weights.
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let h = hermite_orthonormal(n + 1, *x);
                let dh = (n as f64).sqrt() * h[n - 1];
                if dh != 0.0 {
                    *x -= h[n] / dh;
                }
            }
            let h = hermite_orthonormal(n, *x);
            weights.push(1.0 / h.iter().map(|v| v * v).sum::<f64>());
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mid + half * x, half * w))
            .collect()
    }

    /// Composite rule on `[a, b]` with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        (0..panels)
            .flat_map(|p| self.on(a + h * p as f64, a + h * (p + 1) as f64))
            .collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Uniform nodes on `[-half_width, half_width]` with trapezoid weights.
pub fn trapezoid(half_width: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 2, "trapezoid rule needs two nodes");
    let h = 2.0 * half_width / (count - 1) as f64;
    let nodes = (0..count).map(|j| -half_width + h * j as f64).collect();
    let weights = (0..count)
        .map(|j| if j == 0 || j == count - 1 { 0.5 * h } else { h })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_matches_normal_moments() {
        let q = GaussHermite::new(20);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((q.expect(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((q.expect(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((q.expect(|x| x.powi(6)) - 15.0).abs() < 1e-11);
        assert!(q.expect(|x| x.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn hermite_rule_is_orthonormal_for_the_basis() {
        let n = 40;
        let q = GaussHermite::new(n);
        let vals: Vec<_> = q.nodes.iter().map(|&x| hermite_orthonormal(n, x)).collect();
        for a in 0..n {
            for b in 0..n {
                let g: f64 = vals.iter().zip(&q.weights).map(|(h, w)| w * h[a] * h[b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "({a},{b}) {g}");
            }
        }
    }

    #[test]
    fn large_hermite_rule_still_normalized() {
        let q = GaussHermite::new(200);
        assert!((q.expect(|x| x * x) - 1.0).abs() < 1e-10);
        assert!((q.expect(|x| (0.3 * x).cos()) - (-0.045f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let q = GaussLegendre::new(12);
        let s: f64 = q.on(0.0, 2.0).iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-10);
        let c: f64 = q.composite(0.0, std::f64::consts::PI, 4).iter().map(|(x, w)| w * x.sin()).sum();
        assert!((c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let (x, w) = trapezoid(3.0, 61);
        assert_eq!(x.len(), 61);
        assert!((w.iter().sum::<f64>() - 6.0).abs() < 1e-13);
        assert!((x[30]).abs() < 1e-15);
    }
}
