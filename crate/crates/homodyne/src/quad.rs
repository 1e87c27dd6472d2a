//! Gauss-Legendre quadrature with composite panels and panel-doubling
//! adaptivity, plus deterministic pairwise summation helpers.

use num_complex::Complex64;
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The 64-point rule, cached; the workhorse of every panel integrator.
pub fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Composite 64-point Gauss-Legendre over `panels` equal panels of [a, b].
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl64();
    let width = (b - a) / panels as f64;
    let mut parts = Vec::with_capacity(panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * f(mid + half * x);
        }
        parts.push(acc * half);
    }
    pairwise_sum(&parts)
}

/// Same as [`integrate_panels`] for complex-valued integrands.
pub fn integrate_panels_c<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
) -> Complex64 {
    let (nodes, weights) = gl64();
    let width = (b - a) / panels as f64;
    let mut parts = Vec::with_capacity(panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in nodes.iter().zip(weights) {
            acc += f(mid + half * x) * *w;
        }
        parts.push(acc * half);
    }
    pairwise_sum_c(&parts)
}

/// Panel-doubling integration: starts from `panels0` panels and doubles
/// until successive estimates agree to `rtol` (relative) or `atol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels0: usize,
    rtol: f64,
    atol: f64,
) -> f64 {
    let mut panels = panels0.max(1);
    let mut prev = integrate_panels(&mut f, a, b, panels);
    for _ in 0..12 {
        panels *= 2;
        let cur = integrate_panels(&mut f, a, b, panels);
        if (cur - prev).abs() <= rtol * cur.abs().max(1e-300) + atol {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Deterministic pairwise (tree) sum; order independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Pairwise sum for complex values.
pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
        }
    }
}

/// Streaming deterministic sum: accumulates fixed-size blocks sequentially
/// and pairwise-reduces the block sums. Equivalent result for any thread
/// count because the block boundaries depend only on the index.
pub struct BlockSum {
    block: f64,
    count: usize,
    block_size: usize,
    partials: Vec<f64>,
}

impl BlockSum {
    pub fn new(block_size: usize) -> Self {
        Self {
            block: 0.0,
            count: 0,
            block_size: block_size.max(1),
            partials: Vec::new(),
        }
    }

    pub fn add(&mut self, x: f64) {
        self.block += x;
        self.count += 1;
        if self.count == self.block_size {
            self.partials.push(self.block);
            self.block = 0.0;
            self.count = 0;
        }
    }

    pub fn finish(mut self) -> f64 {
        if self.count > 0 {
            self.partials.push(self.block);
        }
        pairwise_sum(&self.partials)
    }
}

/// Simple least-squares line fit; returns (slope, intercept, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exactness_on_polynomials() {
        // 64-point rule integrates x^k exactly for k <= 127
        let (nodes, weights) = gauss_legendre(64);
        let int_x2: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x * x)
            .sum();
        assert!((int_x2 - 2.0 / 3.0).abs() < 1e-14);
        let int_x10: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x.powi(10))
            .sum();
        assert!((int_x10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gaussian_integral() {
        let v = integrate_adaptive(|x: f64| (-x * x).exp(), -12.0, 12.0, 4, 1e-12, 0.0);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64) * 0.1).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
        let mut bs = BlockSum::new(64);
        for &x in &xs {
            bs.add(x);
        }
        assert!((bs.finish() - naive).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (s, i, r2) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((i - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
