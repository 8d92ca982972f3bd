//! Gauss-Legendre quadrature.

use std::f64::consts::PI;

/// Nodes and weights on `[a, b]`.
pub(crate) fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid - half * x, half * w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let q = gauss_legendre(6, -1.0, 2.0);
        let s: f64 = q.iter().map(|(x, w)| w * x.powi(11)).sum();
        let exact = (2f64.powi(12) - 1.0) / 12.0;
        assert!((s - exact).abs() < 1e-11 * exact);
        let s: f64 = gauss_legendre(32, 0.0, PI)
            .iter()
            .map(|(x, w)| w * x.sin())
            .sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
