//! Least-squares rate fits on sampled norms.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FitKind {
    /// `value ≈ C e^{−rate·t}`; `value` is the rate.
    Exponential,
    /// `value ≈ C (1+t)^{exponent}`; `value` is the exponent.
    Algebraic,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Fit {
    pub kind: FitKind,
    pub value: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn window_points(times: &[f64], values: &[f64], window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12 && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .unzip()
}

/// Decay rate of `values` over `window`; `None` with fewer than two points.
pub fn exponential_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Option<Fit> {
    let (t, y) = window_points(times, values, window);
    if t.len() < 2 {
        return None;
    }
    let (slope, intercept) = least_squares(&t, &y);
    Some(Fit { kind: FitKind::Exponential, value: -slope, intercept, window, points: t.len() })
}

/// Exponent of `values` against `1+t` over `window`.
pub fn algebraic_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Option<Fit> {
    let (t, y) = window_points(times, values, window);
    if t.len() < 2 {
        return None;
    }
    let x: Vec<f64> = t.iter().map(|t| (1.0 + t).ln()).collect();
    let (slope, intercept) = least_squares(&x, &y);
    Some(Fit { kind: FitKind::Algebraic, value: slope, intercept, window, points: t.len() })
}

/// Horizon `T` at which `values` first falls below `drop·values[0]`, or the last time.
pub fn decay_horizon(times: &[f64], values: &[f64], drop: f64) -> f64 {
    let v0 = values.first().copied().unwrap_or(0.0);
    times
        .iter()
        .zip(values)
        .find(|(_, v)| **v <= drop * v0)
        .map(|(t, _)| *t)
        .unwrap_or_else(|| times.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_rate() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = exponential_rate(&t, &v, (5.0, 20.0)).unwrap();
        assert!((f.value - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn recovers_algebraic_exponent() {
        let t: Vec<f64> = (0..=200).map(|k| k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-2.5)).collect();
        let f = algebraic_exponent(&t, &v, (100.0, 200.0)).unwrap();
        assert!((f.value + 2.5).abs() < 1e-12);
        assert_eq!(f.points, 101);
    }

    #[test]
    fn horizon_at_first_drop() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(decay_horizon(&t, &[1.0, 0.5, 1e-9, 1e-10], 1e-8), 2.0);
        assert_eq!(decay_horizon(&t, &[1.0, 0.5, 0.4, 0.3], 1e-8), 3.0);
    }
}
