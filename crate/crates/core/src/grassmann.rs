//! Linear subspaces stored as orthonormal frames, flags `(u, U)` with
//! `u` orthogonal to `U`, and the determinant functional `L[U]`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance for accepting a frame as orthonormal.
pub const FRAME_TOL: f64 = 1e-10;
/// Residual norm below which Gram–Schmidt treats a vector as dependent.
pub const GRAM_SCHMIDT_TOL: f64 = 1e-12;

/// A linear subspace of `R^d` given by an orthonormal frame (`d x j`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    frame: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a frame, checking that its Gram matrix is the identity.
    pub fn new(frame: DMatrix<f64>) -> Result<Self> {
        let gram = frame.transpose() * &frame;
        let j = frame.ncols();
        for r in 0..j {
            for c in 0..j {
                let target = if r == c { 1.0 } else { 0.0 };
                if (gram[(r, c)] - target).abs() > FRAME_TOL {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "frame is not orthonormal (gram[{r},{c}] = {})",
                        gram[(r, c)]
                    )));
                }
            }
        }
        Ok(Self { frame })
    }

    /// The zero subspace of `R^d`.
    pub fn trivial(ambient_dim: usize) -> Self {
        Self {
            frame: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// Span of the given vectors, orthonormalised by modified Gram–Schmidt.
    /// Dependent vectors are dropped.
    pub fn span(ambient_dim: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
            if let Some(q) = orthonormalize_against(v.clone(), &basis) {
                basis.push(q);
            }
        }
        Ok(Self::from_columns(ambient_dim, &basis))
    }

    /// Orthogonal complement `u^perp` of a nonzero vector.
    pub fn orthogonal_to(u: &DVector<f64>) -> Self {
        Self::trivial(u.len()).complement_with(core::slice::from_ref(u))
    }

    /// Orthogonal complement of this subspace in `R^d`.
    pub fn complement(&self) -> Self {
        let cols: Vec<DVector<f64>> = self.frame.column_iter().map(|c| c.into_owned()).collect();
        Self::trivial(self.ambient_dim()).complement_with(&cols)
    }

    fn complement_with(&self, taken: &[DVector<f64>]) -> Self {
        let d = self.ambient_dim();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in taken {
            if let Some(q) = orthonormalize_against(v.clone(), &basis) {
                basis.push(q);
            }
        }
        let fixed = basis.len();
        for i in 0..d {
            if basis.len() == d {
                break;
            }
            if let Some(q) = orthonormalize_against(DVector::from_fn(d, |r, _| (r == i) as u8 as f64), &basis) {
                basis.push(q);
            }
        }
        Self::from_columns(d, &basis[fixed..])
    }

    fn from_columns(ambient_dim: usize, cols: &[DVector<f64>]) -> Self {
        let mut frame = DMatrix::zeros(ambient_dim, cols.len());
        for (c, v) in cols.iter().enumerate() {
            frame.set_column(c, v);
        }
        Self { frame }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.frame * (self.frame.transpose() * x)
    }

    /// Image under an orthogonal map `r`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Self {
        Self {
            frame: r * &self.frame,
        }
    }

    /// Same subspace, frame multiplied on the right by an orthogonal `j x j`
    /// matrix.
    pub fn reframed(&self, q: &DMatrix<f64>) -> Self {
        Self {
            frame: &self.frame * q,
        }
    }
}

fn orthonormalize_against(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let scale = v.norm();
    if scale == 0.0 {
        return None;
    }
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let n = v.norm();
    if n <= GRAM_SCHMIDT_TOL * scale.max(1.0) {
        None
    } else {
        Some(v / n)
    }
}

/// A flag `(u, U)`: a unit vector and a subspace orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    u: DVector<f64>,
    subspace: Subspace,
}

impl Flag {
    pub fn new(u: DVector<f64>, subspace: Subspace) -> Result<Self> {
        if u.len() != subspace.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: subspace.ambient_dim(),
                found: u.len(),
            });
        }
        if (u.norm() - 1.0).abs() > FRAME_TOL {
            return Err(Error::InvalidArgument(alloc::format!(
                "flag direction has norm {}",
                u.norm()
            )));
        }
        let dots = subspace.frame().transpose() * &u;
        if dots.iter().any(|x| x.abs() > FRAME_TOL) {
            return Err(Error::InvalidArgument(
                "flag subspace is not orthogonal to its direction".into(),
            ));
        }
        Ok(Self { u, subspace })
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn ambient_dim(&self) -> usize {
        self.u.len()
    }

    pub fn rotated(&self, r: &DMatrix<f64>) -> Self {
        Self {
            u: r * &self.u,
            subspace: self.subspace.rotated(r),
        }
    }
}

fn check_square(l: &DMatrix<f64>, d: usize) -> Result<()> {
    if l.nrows() != l.ncols() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            found: l.ncols(),
        });
    }
    if l.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: l.nrows(),
        });
    }
    let scale = l.amax().max(1.0);
    for r in 0..d {
        for c in r + 1..d {
            if (l[(r, c)] - l[(c, r)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument("matrix is not symmetric".into()));
            }
        }
    }
    Ok(())
}

fn det(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.determinant()
    }
}

/// `L[U] = det(<L u_i, u_j>)` for an orthonormal frame of `U`; 1 for `U = {0}`.
pub fn lambda_bracket(l: &DMatrix<f64>, u: &Subspace) -> Result<f64> {
    check_square(l, u.ambient_dim())?;
    let f = u.frame();
    Ok(det(f.transpose() * l * f))
}

/// `L[U]` via the eigen-expansion `sum_{|I| = j} lambda_I <U, B_I>^2`, where
/// `B_I` is spanned by the eigenvectors indexed by `I`.
pub fn eigen_expansion(l: &DMatrix<f64>, u: &Subspace) -> Result<f64> {
    check_square(l, u.ambient_dim())?;
    let d = u.ambient_dim();
    let j = u.dim();
    let eig = SymmetricEigen::new(l.clone());
    // Rows: eigenvectors, columns: frame vectors.
    let coords = eig.eigenvectors.transpose() * u.frame();
    let mut total = 0.0;
    for subset in index_subsets(d, j) {
        let lambda_i: f64 = subset.iter().map(|&i| eig.eigenvalues[i]).product();
        let minor = coords.select_rows(subset.iter());
        let p = det(minor);
        total += lambda_i * p * p;
    }
    Ok(total)
}

/// `<U, V>^2`, the squared determinant of `(<u_i, v_j>)`; lies in `[0, 1]`.
pub fn subspace_pairing(u: &Subspace, v: &Subspace) -> Result<f64> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: u.ambient_dim(),
            found: v.ambient_dim(),
        });
    }
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let p = det(u.frame().transpose() * v.frame());
    Ok(p * p)
}

/// Squared norm of `v_1 ^ ... ^ v_k`, i.e. the Gram determinant.
pub fn wedge_norm_sq(vectors: &[DVector<f64>]) -> f64 {
    let k = vectors.len();
    let gram = DMatrix::from_fn(k, k, |r, c| vectors[r].dot(&vectors[c]));
    det(gram)
}

/// All `k`-element subsets of `{0, .., n-1}` in lexicographic order.
pub fn index_subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut state: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    core::iter::from_fn(move || {
        let current = state.take()?;
        let mut next = current.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for m in i + 1..k {
                    next[m] = next[m - 1] + 1;
                }
                state = Some(next);
                break;
            }
        }
        Some(current)
    })
}

/// Uniform point on `S^{d-1}`.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Uniformly distributed `j`-dimensional subspace of `u^perp`.
pub fn sample_subspace_orthogonal_to<R: Rng + ?Sized>(
    rng: &mut R,
    u: &DVector<f64>,
    j: usize,
) -> Subspace {
    let d = u.len();
    assert!(j < d, "subspace of u^perp has dimension at most d - 1");
    let unit = [u.clone()];
    loop {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(j);
        let mut dependent = false;
        for _ in 0..j {
            let mut g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let c = u.dot(&g);
            g.axpy(-c, u, 1.0);
            match orthonormalize_against(g, &basis).and_then(|q| orthonormalize_against(q, &unit)) {
                Some(q) => basis.push(q),
                None => {
                    dependent = true;
                    break;
                }
            }
        }
        if !dependent {
            return Subspace::from_columns(d, &basis);
        }
    }
}

/// Draws from the rotation-invariant probability measure on flags
/// `(u, U)` with `dim U = j`.
pub fn sample_flag<R: Rng + ?Sized>(rng: &mut R, d: usize, j: usize) -> Flag {
    assert!(d >= 1 && j < d, "flag needs 0 <= j <= d - 1");
    let u = sample_unit_vector(rng, d);
    let subspace = sample_subspace_orthogonal_to(rng, &u, j);
    Flag { u, subspace }
}

/// Haar-distributed rotation in `SO(d)`.
pub fn sample_rotation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cols: Vec<DVector<f64>> = g.column_iter().map(|c| c.into_owned()).collect();
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
        for v in &cols {
            match orthonormalize_against(v.clone(), &basis) {
                Some(q) => basis.push(q),
                None => break,
            }
        }
        if basis.len() < d {
            continue;
        }
        let mut q = Subspace::from_columns(d, &basis).frame;
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        return q;
    }
}
