//! Dense complex linear algebra: a fast product and the matrix exponential.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `alpha * a * b + beta * c`, written into `c`.
pub fn gemm(alpha: Complex64, a: &CMat, b: &CMat, beta: Complex64, c: &mut CMat) {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(c.nrows(), a.nrows());
    assert_eq!(c.ncols(), b.ncols());
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: nalgebra's dense storage is contiguous column-major and
    // Complex64 is repr(C) with the same layout as [f64; 2].
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut c = CMat::zeros(a.nrows(), b.ncols());
    gemm(ONE, a, b, ZERO, &mut c);
    c
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA_13: f64 = 5.371920351148152;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

fn scaled(a: &CMat, s: f64) -> CMat {
    a * Complex64::new(s, 0.0)
}

/// Matrix exponential by Padé scaling and squaring (Higham 2005).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let nrm = norm1(a);
    if nrm == 0.0 {
        return identity(n);
    }
    for &(m, theta) in THETA.iter() {
        if nrm <= theta {
            return pade_low(a, m);
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scaled(a, 0.5f64.powi(s));
    let mut r = pade_13(&a);
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    r
}

fn solve_pade(u: CMat, v: CMat) -> CMat {
    let p = &v + &u;
    let q = &v - &u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is singular; the matrix exponential is undefined here")
}

fn pade_low(a: &CMat, m: usize) -> CMat {
    let b = pade_coefficients(m);
    let n = a.nrows();
    let a2 = matmul(a, a);
    let mut powers = vec![identity(n), a2.clone()];
    for _ in 2..=m / 2 {
        let next = matmul(powers.last().unwrap(), &a2);
        powers.push(next);
    }
    let mut u_inner = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for (j, p) in powers.iter().enumerate() {
        u_inner += scaled(p, b[2 * j + 1]);
        v += scaled(p, b[2 * j]);
    }
    let u = matmul(a, &u_inner);
    solve_pade(u, v)
}

fn pade_13(a: &CMat) -> CMat {
    let b = pade_coefficients(13);
    let n = a.nrows();
    let id = identity(n);
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let mut u_sum = matmul(&a6, &inner_u);
    u_sum += scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]);
    let u = matmul(a, &u_sum);
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let mut v = matmul(&a6, &inner_v);
    v += scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    solve_pade(u, v)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, scale: f64, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    }

    #[test]
    fn gemm_matches_nalgebra() {
        let a = random(7, 1.0, 1);
        let b = random(7, 1.0, 2);
        assert!(max_abs_diff(&matmul(&a, &b), &(&a * &b)) < 1e-13);
    }

    #[test]
    fn expm_matches_nalgebra_across_branches() {
        for (k, scale) in [1e-3, 0.03, 0.1, 0.3, 1.0, 5.0].iter().enumerate() {
            let a = random(9, *scale, 10 + k as u64);
            let ours = expm(&a);
            let theirs = a.clone().exp();
            let rel = max_abs_diff(&ours, &theirs) / norm1(&theirs);
            assert!(rel < 1e-12, "scale {scale}: {rel}");
        }
    }

    #[test]
    fn expm_of_diagonal_is_exact() {
        let d = CMat::from_diagonal(&CVec::from_fn(5, |i, _| Complex64::new(-(i as f64) * 7.0, i as f64)));
        let e = expm(&d);
        for i in 0..5 {
            let want = Complex64::new(-(i as f64) * 7.0, i as f64).exp();
            assert!((e[(i, i)] - want).norm() < 1e-13 * want.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn expm_commuting_sum() {
        let a = random(6, 0.7, 3);
        let two = expm(&scaled(&a, 2.0));
        let once = expm(&a);
        assert!(max_abs_diff(&two, &matmul(&once, &once)) < 1e-12 * norm1(&two));
    }
}
