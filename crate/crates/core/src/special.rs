//! Scalar special functions and the integral-geometric constants built on them.
//!
//! Hermite polynomials use the probabilists' convention (`H_2(t) = t^2 - 1`).
//! `O_k` always denotes the `k`-dimensional measure of the unit sphere `S^k`
//! sitting in `R^{k+1}`.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{self, GaussLegendre};

const HERMITE_SUM_MAX_ORDER: u32 = 20;
const F_KL_SMALL_ANGLE: f64 = 1e-4;
const F_KL_ABS_TOL: f64 = 1e-10;
const F_KL_REL_TOL: f64 = 1e-13;

/// Probabilists' Hermite polynomial `H_n(t)`.
///
/// Orders up to 20 are evaluated from the explicit alternating sum; higher
/// orders continue with the three-term recurrence.
pub fn hermite(n: u32, t: f64) -> f64 {
    if n <= HERMITE_SUM_MAX_ORDER {
        return hermite_explicit(n, t);
    }
    let mut prev = hermite_explicit(HERMITE_SUM_MAX_ORDER - 1, t);
    let mut cur = hermite_explicit(HERMITE_SUM_MAX_ORDER, t);
    for m in HERMITE_SUM_MAX_ORDER..n {
        let next = t * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn hermite_explicit(n: u32, t: f64) -> f64 {
    // n! sum_j (-1)^j t^{n-2j} / (j! (n-2j)! 2^j), with the factorial ratio
    // accumulated as an integer-valued coefficient.
    let mut sum = 0.0;
    let mut coeff = 1.0; // n! / ((n-2j)! j! 2^j)
    for j in 0..=n / 2 {
        if j > 0 {
            let nf = n as f64;
            let jf = j as f64;
            coeff *= (nf - 2.0 * jf + 2.0) * (nf - 2.0 * jf + 1.0) / (2.0 * jf);
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * coeff * libm::pow(t, (n - 2 * j) as f64);
    }
    sum
}

/// Upper tail of the standard normal distribution, `P[N(0,1) >= t]`.
pub fn gaussian_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / core::f64::consts::SQRT_2)
}

/// `O_k`, the `k`-dimensional Hausdorff measure of the unit sphere `S^k`.
pub fn sphere_surface(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * libm::pow(PI, h) / libm::tgamma(h)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    libm::pow(PI, h) / libm::tgamma(h + 1.0)
}

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Euler Beta function `B(a, b)`.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    libm::exp(libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b))
}

/// Kinematic constant `beta_{d,k}` in its Gamma-ratio form.
pub fn beta_const(d: usize, k: usize) -> f64 {
    assert!(k <= d, "beta_const requires k <= d");
    let g = |x: f64| libm::tgamma(x);
    g((k as f64 + 1.0) / 2.0) * g((d as f64 - k as f64 + 1.0) / 2.0)
        / (g((d as f64 + 1.0) / 2.0) * g(0.5))
}

/// `beta_{d,k}` rewritten through the Legendre duplication formula.
///
/// The binomial form is `0 * inf` at `k = d`; its limit there is 1.
pub fn beta_const_binomial(d: usize, k: usize) -> f64 {
    assert!(k <= d, "beta_const_binomial requires k <= d");
    if k == d {
        return 1.0;
    }
    let g = |x: f64| libm::tgamma(x);
    g(d as f64 / 2.0)
        / (binomial(d - 1, k) * g(k as f64 / 2.0 + 1.0) * g((d - k) as f64 / 2.0))
}

/// Flag-measure normalisation `gamma_{d,k} = binom(d-1, k) / O_{d-1-k}`.
pub fn gamma_const(d: usize, k: usize) -> f64 {
    assert!(k < d, "gamma_const requires k <= d - 1");
    binomial(d - 1, k) / sphere_surface(d - 1 - k)
}

/// The angular weight `F_{k,l}(theta)` of the mixed curvature measures.
///
/// Requires `k, l <= d - 1` and `k + l >= d`. `F_{k,l}(pi)` is zero by
/// definition; below `1e-4` the small-angle limit `B(d-k, d-l) / O_{2d-k-l-1}`
/// is returned.
pub fn f_kl(theta: f64, d: usize, k: usize, l: usize) -> Result<f64> {
    f_kl_with_tolerance(theta, d, k, l, F_KL_ABS_TOL)
}

/// [`f_kl`] with an explicit absolute tolerance for the inner quadrature.
pub fn f_kl_with_tolerance(theta: f64, d: usize, k: usize, l: usize, abs_tol: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::AngleOutOfRange(theta));
    }
    if d == 0 || k >= d || l >= d || k + l < d {
        return Err(Error::InvalidArgument(alloc::format!(
            "F_kl needs k, l <= d - 1 and k + l >= d (d={d}, k={k}, l={l})"
        )));
    }
    if theta == PI {
        return Ok(0.0);
    }
    let norm = sphere_surface(2 * d - k - l - 1);
    if theta < F_KL_SMALL_ANGLE {
        return Ok(beta_fn((d - k) as f64, (d - l) as f64) / norm);
    }
    let a = (d - 1 - k) as i32;
    let b = (d - 1 - l) as i32;
    let s = libm::sin(theta);
    let rule = GaussLegendre::new(10);
    let integral = quadrature::adaptive(
        &rule,
        |t| {
            libm::pow(libm::sin((1.0 - t) * theta) / s, a as f64)
                * libm::pow(libm::sin(t * theta) / s, b as f64)
        },
        0.0,
        1.0,
        abs_tol,
        F_KL_REL_TOL,
    );
    Ok(theta / s * integral / norm)
}
