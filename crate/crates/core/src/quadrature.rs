//! One-dimensional Gauss–Legendre rules and an adaptive bisection driver.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
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

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
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
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = if n == 0 {
        0.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p, dp)
}

/// Adaptive Gauss–Legendre integration by interval bisection.
///
/// An interval is accepted once the rule on the whole interval and the sum
/// over its two halves differ by at most `max(abs_tol, rel_tol * |I|)`,
/// with the tolerance split evenly between sub-intervals.
pub fn adaptive<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let whole = rule.integrate(&mut f, a, b);
    recurse(rule, &mut f, a, b, whole, abs_tol, rel_tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(&mut *f, a, mid);
    let right = rule.integrate(&mut *f, mid, b);
    let split = left + right;
    let tol = abs_tol.max(rel_tol * split.abs());
    if (split - whole).abs() <= tol || depth >= 40 {
        return split;
    }
    recurse(rule, f, a, mid, left, 0.5 * abs_tol, rel_tol, depth + 1)
        + recurse(rule, f, mid, b, right, 0.5 * abs_tol, rel_tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(6);
        // Exact up to degree 11.
        let v = rule.integrate(|x| x.powi(10) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_center_node() {
        let rule = GaussLegendre::new(5);
        assert_eq!(rule.nodes()[2], 0.0);
        assert!((rule.weights()[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let rule = GaussLegendre::new(10);
        let v = adaptive(&rule, |x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 1e-12);
        let exact = 2.0 * libm::atan(1.0 / 1e-2) / 1e-2;
        assert!((v - exact).abs() / exact < 1e-10);
    }
}
