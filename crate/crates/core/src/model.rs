//! Stationary centred Gaussian covariance models with closed-form spectral
//! moments.

use alloc::string::ToString;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor (times the trace) for positive definiteness.
const PD_REL_TOL: f64 = 1e-10;

/// Parametric covariance family.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceFamily {
    /// `C(x) = sigma2 * exp(-|x|^2 / (2 ell^2))`.
    SquaredExponentialIsotropic { sigma2: f64, ell: f64 },
    /// `C(x) = sigma2 * exp(-x^T A x / 2)` with `A` symmetric positive definite.
    SquaredExponentialAnisotropic { sigma2: f64, shape: DMatrix<f64> },
}

/// A validated covariance model in `R^d`.
///
/// `lambda_matrix` is the covariance of the gradient at a point, i.e.
/// minus the Hessian of `C` at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    family: CovarianceFamily,
    dim: usize,
    lambda: DMatrix<f64>,
    lambda_eigenvalues: (f64, f64),
    shape_inverse: DMatrix<f64>,
    shape_det: f64,
}

impl CovarianceModel {
    pub fn isotropic(dim: usize, sigma2: f64, ell: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel("sigma2 must be positive".into()));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidModel("ell must be positive".into()));
        }
        let a = 1.0 / (ell * ell);
        Ok(Self {
            family: CovarianceFamily::SquaredExponentialIsotropic { sigma2, ell },
            dim,
            lambda: DMatrix::identity(dim, dim) * (sigma2 * a),
            lambda_eigenvalues: (sigma2 * a, sigma2 * a),
            shape_inverse: DMatrix::identity(dim, dim) * (ell * ell),
            shape_det: libm::pow(a, dim as f64),
        })
    }

    pub fn anisotropic(sigma2: f64, shape: DMatrix<f64>) -> Result<Self> {
        let dim = shape.nrows();
        if dim == 0 || shape.ncols() != dim {
            return Err(Error::InvalidModel("shape matrix must be square and nonempty".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel("sigma2 must be positive".into()));
        }
        if shape.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("shape matrix has non-finite entries".into()));
        }
        let scale = shape.amax().max(f64::MIN_POSITIVE);
        for r in 0..dim {
            for c in r + 1..dim {
                if (shape[(r, c)] - shape[(c, r)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidModel("shape matrix is not symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(shape.clone());
        let trace = shape.trace();
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if trace.is_nan() || trace <= 0.0 || min <= PD_REL_TOL * trace {
            return Err(Error::InvalidModel(
                "shape matrix is not positive definite".to_string(),
            ));
        }
        let shape_inverse = shape
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("shape matrix is singular".into()))?;
        let shape_det = shape.determinant();
        Ok(Self {
            lambda: &shape * sigma2,
            lambda_eigenvalues: (sigma2 * min, sigma2 * max),
            family: CovarianceFamily::SquaredExponentialAnisotropic { sigma2, shape },
            dim,
            shape_inverse,
            shape_det,
        })
    }

    pub fn family(&self) -> &CovarianceFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Marginal variance `C(0)`.
    pub fn sigma2(&self) -> f64 {
        match &self.family {
            CovarianceFamily::SquaredExponentialIsotropic { sigma2, .. }
            | CovarianceFamily::SquaredExponentialAnisotropic { sigma2, .. } => *sigma2,
        }
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.sigma2())
    }

    /// The spectral-moment matrix `Lambda = -Hess C(0)`.
    pub fn lambda_matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Smallest and largest eigenvalue of `Lambda`.
    pub fn lambda_eigenvalue_range(&self) -> (f64, f64) {
        self.lambda_eigenvalues
    }

    /// True when `Lambda` is a multiple of the identity.
    pub fn is_isotropic(&self) -> bool {
        self.isotropic_lambda().is_some()
    }

    /// The common eigenvalue `lambda` of an isotropic model.
    pub fn isotropic_lambda(&self) -> Option<f64> {
        match &self.family {
            CovarianceFamily::SquaredExponentialIsotropic { .. } => Some(self.lambda[(0, 0)]),
            CovarianceFamily::SquaredExponentialAnisotropic { .. } => {
                let (lo, hi) = self.lambda_eigenvalues;
                let offdiag = (0..self.dim)
                    .flat_map(|r| (0..self.dim).map(move |c| (r, c)))
                    .filter(|(r, c)| r != c)
                    .all(|(r, c)| self.lambda[(r, c)].abs() <= 1e-12 * hi);
                (offdiag && hi - lo <= 1e-12 * hi).then_some(self.lambda[(0, 0)])
            }
        }
    }

    /// Shortest and longest correlation length, `1/sqrt` of the extreme
    /// eigenvalues of the shape matrix.
    pub fn correlation_lengths(&self) -> (f64, f64) {
        let s2 = self.sigma2();
        let (lo, hi) = self.lambda_eigenvalues;
        (libm::sqrt(s2 / hi), libm::sqrt(s2 / lo))
    }

    fn quadratic_form(&self, x: &[f64]) -> f64 {
        match &self.family {
            CovarianceFamily::SquaredExponentialIsotropic { ell, .. } => {
                x.iter().map(|v| v * v).sum::<f64>() / (ell * ell)
            }
            CovarianceFamily::SquaredExponentialAnisotropic { shape, .. } => {
                let mut q = 0.0;
                for r in 0..self.dim {
                    for c in 0..self.dim {
                        q += x[r] * shape[(r, c)] * x[c];
                    }
                }
                q
            }
        }
    }

    /// `C(x) = E xi(0) xi(x)`.
    pub fn covariance(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension must match the model");
        self.sigma2() * libm::exp(-0.5 * self.quadratic_form(x))
    }

    /// Spectral density `rho` with `C(x) = int rho(w) exp(i w.x) dw`.
    pub fn spectral_density(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.dim, "frequency dimension must match the model");
        let mut q = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                q += w[r] * self.shape_inverse[(r, c)] * w[c];
            }
        }
        let norm = libm::pow(2.0 * core::f64::consts::PI, self.dim as f64 / 2.0) * libm::sqrt(self.shape_det);
        self.sigma2() * libm::exp(-0.5 * q) / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;

    fn aniso2() -> CovarianceModel {
        CovarianceModel::anisotropic(1.7, DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0])).unwrap()
    }

    #[test]
    fn covariance_at_origin_and_ell() {
        let m = CovarianceModel::isotropic(3, 2.5, 0.7).unwrap();
        assert_eq!(m.covariance(&[0.0; 3]), 2.5);
        let x = [0.7 / 3f64.sqrt(); 3];
        assert_relative_eq!(m.covariance(&x), 2.5 * (-0.5f64).exp(), max_relative = 1e-14);
        let a = aniso2();
        assert_eq!(a.covariance(&[0.0, 0.0]), 1.7);
        assert_eq!(a.covariance(&[0.3, -1.2]), a.covariance(&[-0.3, 1.2]));
    }

    #[test]
    fn lambda_closed_forms() {
        let m = CovarianceModel::isotropic(2, 2.0, 0.5).unwrap();
        assert_relative_eq!(m.lambda_matrix()[(0, 0)], 8.0);
        assert_eq!(m.lambda_matrix()[(0, 1)], 0.0);
        assert_eq!(m.isotropic_lambda(), Some(8.0));
        let a = aniso2();
        assert_relative_eq!(a.lambda_matrix()[(0, 1)], 1.7 * 0.6, max_relative = 1e-15);
        assert!(!a.is_isotropic());
        let scalar = CovarianceModel::anisotropic(1.0, DMatrix::identity(3, 3) * 4.0).unwrap();
        assert_eq!(scalar.isotropic_lambda(), Some(4.0));
    }

    #[test]
    fn finite_difference_hessian_matches_lambda() {
        let models = [CovarianceModel::isotropic(2, 1.3, 0.8).unwrap(), aniso2(),
            CovarianceModel::anisotropic(0.9, DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.1, 0.2, 2.0, -0.3, 0.1, -0.3, 5.0])).unwrap()];
        let h = 1e-4;
        for m in &models {
            let d = m.dim();
            for i in 0..d {
                for j in 0..d {
                    let at = |si: f64, sj: f64| {
                        let mut x = vec![0.0; d];
                        x[i] += si * h;
                        x[j] += sj * h;
                        m.covariance(&x)
                    };
                    let hess = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
                    let lam = m.lambda_matrix()[(i, j)];
                    let scale = m.lambda_eigenvalue_range().1;
                    assert!((-hess - lam).abs() <= 1e-5 * scale, "i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn spectral_density_integrates_to_variance_and_reproduces_covariance() {
        for m in [CovarianceModel::isotropic(2, 1.4, 0.9).unwrap(), aniso2()] {
            let n = 400;
            let half = 12.0;
            let step = 2.0 * half / n as f64;
            let grid: Vec<f64> = (0..=n).map(|i| -half + i as f64 * step).collect();
            let x = [0.4, -0.25];
            let (mut mass, mut cov) = (0.0, 0.0);
            for &a in &grid {
                for &b in &grid {
                    let r = m.spectral_density(&[a, b]);
                    assert!(r >= 0.0);
                    assert_eq!(r, m.spectral_density(&[-a, -b]));
                    mass += r;
                    cov += r * (a * x[0] + b * x[1]).cos();
                }
            }
            assert_relative_eq!(mass * step * step, m.sigma2(), max_relative = 1e-8);
            assert_relative_eq!(cov * step * step, m.covariance(&x), max_relative = 1e-8);
        }
        let one = CovarianceModel::isotropic(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(one.spectral_density(&[0.0]), 1.0 / (2.0 * core::f64::consts::PI).sqrt());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(CovarianceModel::isotropic(2, 0.0, 1.0).is_err());
        assert!(CovarianceModel::isotropic(2, 1.0, -1.0).is_err());
        assert!(CovarianceModel::isotropic(0, 1.0, 1.0).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovarianceModel::anisotropic(1.0, not_pd), Err(Error::InvalidModel(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(CovarianceModel::anisotropic(1.0, asym).is_err());
        assert!(CovarianceModel::anisotropic(1.0, DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn correlation_lengths() {
        let m = CovarianceModel::anisotropic(3.0, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        let (short, long) = m.correlation_lengths();
        assert_relative_eq!(short, 0.5);
        assert_relative_eq!(long, 1.0);
    }
}
