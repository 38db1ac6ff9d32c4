//! Densities of the excursion set `Z_alpha = {x : xi(x) >= alpha}` of a
//! stationary centred Gaussian field.
//!
//! The flag density `q_k` is taken with respect to the rotation-invariant
//! *probability* measure on flags, so that its total mass is the curvature
//! density `V_k`. Every route to `V_k` in this module (closed form, spherical
//! quadrature, Monte Carlo over flags) shares the scalar prefactor
//! [`level_factor`].

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grassmann::{self, index_subsets, Flag};
use crate::model::CovarianceModel;
use crate::quadrature::GaussLegendre;
use crate::special::{beta_const, binomial, gaussian_tail, hermite};

/// A covariance model together with a threshold level.
#[derive(Debug, Clone)]
pub struct ExcursionSpec {
    model: CovarianceModel,
    alpha: f64,
    lambda_inverse: DMatrix<f64>,
    lambda_det: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ExcursionSpec {
    pub fn new(model: CovarianceModel, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument("threshold must be finite".into()));
        }
        let lambda = model.lambda_matrix().clone();
        let lambda_inverse = lambda
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("gradient covariance is singular".into()))?;
        let lambda_det = lambda.determinant();
        let eig = SymmetricEigen::new(lambda);
        Ok(Self {
            model,
            alpha,
            lambda_inverse,
            lambda_det,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `alpha / sigma`.
    pub fn standardized_level(&self) -> f64 {
        self.alpha / self.model.sigma()
    }

    fn inverse_quadratic(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.lambda_inverse * u)[(0, 0)]
    }
}

fn check_order(spec: &ExcursionSpec, k: usize) -> Result<()> {
    if k >= spec.dim() {
        return Err(Error::InvalidArgument(alloc::format!(
            "curvature order {k} must be below the dimension {}",
            spec.dim()
        )));
    }
    Ok(())
}

/// `beta_{d,k}^{-1} (2 pi)^{(k-d-1)/2} sigma^{k-d} exp(-alpha^2 / 2 sigma^2) H_{d-1-k}(alpha / sigma)`.
pub fn level_factor(spec: &ExcursionSpec, k: usize) -> f64 {
    let d = spec.dim();
    let t = spec.standardized_level();
    let kd = k as f64 - d as f64;
    libm::pow(2.0 * PI, (kd - 1.0) / 2.0) * libm::pow(spec.model.sigma(), kd) * libm::exp(-0.5 * t * t)
        * hermite((d - 1 - k) as u32, t)
        / beta_const(d, k)
}

/// Density `q_k(u, U)` of the specific flag measure of order `k`; the flag
/// subspace must have dimension `d - 1 - k`.
pub fn flag_density_qk(spec: &ExcursionSpec, k: usize, flag: &Flag) -> Result<f64> {
    check_order(spec, k)?;
    let d = spec.dim();
    if flag.ambient_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: flag.ambient_dim(),
        });
    }
    if flag.subspace().dim() != d - 1 - k {
        return Err(Error::DimensionMismatch {
            expected: d - 1 - k,
            found: flag.subspace().dim(),
        });
    }
    let bracket = grassmann::lambda_bracket(spec.model.lambda_matrix(), flag.subspace())?;
    let q = spec.inverse_quadratic(flag.direction());
    Ok(level_factor(spec, k) / libm::sqrt(spec.lambda_det) * libm::pow(q, -(k as f64) / 2.0 - 1.0) * bracket)
}

/// Closed-form curvature density `V_k(Z_alpha)` of an isotropic field.
pub fn curvature_density_iso(spec: &ExcursionSpec, k: usize) -> Result<f64> {
    check_order(spec, k)?;
    let lambda = spec.model.isotropic_lambda().ok_or(Error::NotIsotropic)?;
    Ok(level_factor(spec, k) * libm::pow(lambda, (spec.dim() - k) as f64 / 2.0))
}

/// Volume fraction `V_d(Z_alpha) = P[xi(0) >= alpha]`.
pub fn volume_density(spec: &ExcursionSpec) -> f64 {
    gaussian_tail(spec.standardized_level())
}

/// Weights `lambda_(j) = binom(d-1, k)^{-1} sum_{|I| = d-1-k, j not in I} lambda_I`,
/// indexed like the eigenvalues of `Lambda`.
pub fn directional_weights(spec: &ExcursionSpec, k: usize) -> Result<Vec<f64>> {
    check_order(spec, k)?;
    let d = spec.dim();
    let norm = binomial(d - 1, k);
    Ok((0..d)
        .map(|j| {
            index_subsets(d, d - 1 - k)
                .filter(|set| !set.contains(&j))
                .map(|set| set.iter().map(|&i| spec.eigenvalues[i]).product::<f64>())
                .sum::<f64>()
                / norm
        })
        .collect())
}

/// Resolution schedule for the spherical integral behind
/// [`curvature_density_aniso`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereQuadrature {
    /// Starting number of angular nodes per coordinate.
    pub initial_points: usize,
    /// Upper bound on nodes per coordinate before giving up.
    pub max_points: usize,
    /// Relative change between successive doublings accepted as converged.
    pub rel_tol: f64,
    /// Sample count for the Monte-Carlo fallback in `d >= 4`.
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self {
            initial_points: 32,
            max_points: 1 << 14,
            rel_tol: 1e-11,
            mc_samples: 200_000,
            mc_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereMethod {
    /// Exact evaluation on the two points of `S^0`.
    Exact,
    /// Periodic trapezoid rule on the circle.
    Trapezoid,
    /// Gauss–Legendre in `cos(theta)` times trapezoid in the azimuth.
    ProductGauss,
    MonteCarlo,
}

/// A spherical-integration result; `error` is the last doubling change for
/// deterministic rules and the standard error for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereEstimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub method: SphereMethod,
}

/// Curvature density `V_k(Z_alpha)` for a general (anisotropic) model, from
/// the spherical integral of `sum_j lambda_(j) <u, b_j>^2 / (u^T Lambda^{-1} u)^{k/2 + 1}`
/// against the normalised surface measure.
pub fn curvature_density_aniso(
    spec: &ExcursionSpec,
    k: usize,
    quad: &SphereQuadrature,
) -> Result<SphereEstimate> {
    check_order(spec, k)?;
    let d = spec.dim();
    let scale = level_factor(spec, k) / libm::sqrt(spec.lambda_det);
    let weights = directional_weights(spec, k)?;
    let exponent = -(k as f64) / 2.0 - 1.0;
    let integrand = |u: &DVector<f64>| -> f64 {
        let coords = spec.eigenvectors.transpose() * u;
        let num: f64 = weights.iter().zip(coords.iter()).map(|(w, c)| w * c * c).sum();
        num * libm::pow(spec.inverse_quadratic(u), exponent)
    };
    let scaled = |e: SphereEstimate| SphereEstimate {
        value: e.value * scale,
        error: e.error * scale.abs(),
        ..e
    };
    let estimate = match d {
        1 => {
            let plus = integrand(&DVector::from_element(1, 1.0));
            let minus = integrand(&DVector::from_element(1, -1.0));
            SphereEstimate {
                value: 0.5 * (plus + minus),
                error: 0.0,
                evaluations: 2,
                method: SphereMethod::Exact,
            }
        }
        2 => refine(quad, SphereMethod::Trapezoid, |n| {
            let sum: f64 = (0..n)
                .map(|i| {
                    let phi = 2.0 * PI * i as f64 / n as f64;
                    integrand(&DVector::from_vec(alloc::vec![libm::cos(phi), libm::sin(phi)]))
                })
                .sum();
            (sum / n as f64, n)
        })?,
        3 => refine(quad, SphereMethod::ProductGauss, |n| {
            let rule = GaussLegendre::new(n);
            let m = 2 * n;
            let mut sum = 0.0;
            for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
                let r = libm::sqrt((1.0 - z * z).max(0.0));
                let ring: f64 = (0..m)
                    .map(|i| {
                        let phi = 2.0 * PI * i as f64 / m as f64;
                        integrand(&DVector::from_vec(alloc::vec![r * libm::cos(phi), r * libm::sin(phi), z]))
                    })
                    .sum();
                sum += w * ring / m as f64;
            }
            // Weights sum to 2 = length of [-1, 1].
            (0.5 * sum, n * m)
        })?,
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(quad.mc_seed);
            let n = quad.mc_samples.max(2);
            let stats = Welford::from_iter((0..n).map(|_| integrand(&grassmann::sample_unit_vector(&mut rng, d))));
            SphereEstimate {
                value: stats.mean,
                error: stats.std_error(),
                evaluations: n,
                method: SphereMethod::MonteCarlo,
            }
        }
    };
    Ok(scaled(estimate))
}

fn refine<F: FnMut(usize) -> (f64, usize)>(
    quad: &SphereQuadrature,
    method: SphereMethod,
    mut rule: F,
) -> Result<SphereEstimate> {
    let mut n = quad.initial_points.max(2);
    let (mut prev, mut evaluations) = rule(n);
    loop {
        n *= 2;
        let (cur, evals) = rule(n);
        evaluations += evals;
        let change = (cur - prev).abs();
        let scale = cur.abs();
        if change <= quad.rel_tol * scale || scale == 0.0 && change == 0.0 {
            return Ok(SphereEstimate {
                value: cur,
                error: change,
                evaluations,
                method,
            });
        }
        if n >= quad.max_points {
            return Err(Error::QuadratureNotConverged {
                achieved: if scale > 0.0 { change / scale } else { change },
                evaluations,
            });
        }
        prev = cur;
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

#[derive(Debug, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        libm::sqrt(self.m2 / (self.n - 1) as f64 / self.n as f64)
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::default();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Unbiased Monte-Carlo estimate of the total flag mass `int q_k d mu_k`,
/// i.e. of `V_k(Z_alpha)`.
pub fn mc_total_flag_mass<R: Rng + ?Sized>(
    spec: &ExcursionSpec,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_order(spec, k)?;
    if n < 100 {
        return Err(Error::InvalidArgument(alloc::format!(
            "Monte-Carlo flag mass needs at least 100 samples, got {n}"
        )));
    }
    let d = spec.dim();
    let mut stats = Welford::default();
    for _ in 0..n {
        let flag = grassmann::sample_flag(rng, d, d - 1 - k);
        stats.push(flag_density_qk(spec, k, &flag)?);
    }
    Ok(McEstimate {
        mean: stats.mean,
        std_error: stats.std_error(),
        samples: n,
    })
}
