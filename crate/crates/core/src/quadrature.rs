//! Gauss-Legendre rules on `[-1, 1]`.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Node count used for every parametric sojourn law.
pub const ORDER: usize = 64;

/// The cached 64-point rule as `(node, weight)` pairs.
pub fn gauss_legendre_64() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// `n`-point rule from Newton iteration on `P_n`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be positive");
    let mut rule = Vec::with_capacity(n);
    for k in 0..n.div_ceil(2) {
        // Tricomi's initial guess for the k-th largest root
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
        if 2 * k + 1 != n {
            rule.push((-x, w));
        }
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
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

/// Integral of `f` over `[lo, hi]` with the 64-point rule.
pub fn integrate<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    half * gauss_legendre_64()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}
