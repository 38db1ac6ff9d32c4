//! Zonotope windows `W = [0, v_1] + ... + [0, v_m]`, their faces through the
//! origin, and the closed-form mean Euler characteristic of `Z_alpha ∩ W`.
//!
//! A sub-sum `F = sum_{i in S} [0, v_i]` is a face of `W` containing the
//! origin iff some `c` has `<c, v_i> = 0` on `S` and `<c, v_i> < 0` off `S`.
//! That is decided with a small linear program maximising the margin.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::densities::{curvature_density_iso, volume_density, ExcursionSpec};
use crate::error::{Error, Result};
use crate::grassmann::{index_subsets, lambda_bracket, wedge_norm_sq, Subspace};
use crate::simplex::{maximize, LpOutcome};
use crate::special::{beta_const, binomial, hermite, unit_ball_volume};

/// Largest generator count accepted; face volumes sum over subsets.
pub const MAX_GENERATORS: usize = 16;
const FEASIBILITY_MARGIN: f64 = 1e-9;
const SPAN_TOL: f64 = 1e-10;

/// A full-dimensional zonotope with a vertex at the origin.
///
/// Generators are kept in a canonical (lexicographic) order, so the
/// zonotope and everything computed from it does not depend on the order in
/// which segments were supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    generators: Vec<DVector<f64>>,
    dim: usize,
}

/// A face of a zonotope that contains the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonotopeFace {
    /// Indices (into [`Zonotope::generators`]) of the generators spanning the face.
    pub subset: Vec<usize>,
    pub dim: usize,
    /// `dim`-dimensional volume of the face.
    pub volume: f64,
    /// Orthonormal frame of the linear hull of the face.
    pub span_frame: Subspace,
}

impl Zonotope {
    pub fn new(mut generators: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidZonotope("no generators".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidZonotope("generators must be nonempty vectors".into()));
        }
        if generators.len() > MAX_GENERATORS {
            return Err(Error::InvalidZonotope(alloc::format!(
                "{} generators exceed the limit of {MAX_GENERATORS}",
                generators.len()
            )));
        }
        for v in &generators {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidZonotope("generator has non-finite entries".into()));
            }
            if v.norm() == 0.0 {
                return Err(Error::InvalidZonotope("zero generator".into()));
            }
        }
        if generators.len() < dim || Subspace::span(dim, &generators)?.dim() < dim {
            return Err(Error::InvalidZonotope("generators do not span the ambient space".into()));
        }
        generators.sort_by(lexicographic);
        Ok(Self { generators, dim })
    }

    /// Axis-parallel box `[0, s_1] x ... x [0, s_d]`.
    pub fn axis_box(sides: &[f64]) -> Result<Self> {
        let d = sides.len();
        if sides.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidZonotope("box sides must be positive".into()));
        }
        Self::new(
            sides
                .iter()
                .enumerate()
                .map(|(i, &s)| DVector::from_fn(d, |r, _| if r == i { s } else { 0.0 }))
                .collect(),
        )
    }

    /// Cube `[0, side]^d`.
    pub fn cube(d: usize, side: f64) -> Result<Self> {
        Self::axis_box(&alloc::vec![side; d])
    }

    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Image under a linear map.
    pub fn transformed(&self, map: &DMatrix<f64>) -> Result<Self> {
        Self::new(self.generators.iter().map(|v| map * v).collect())
    }

    fn max_norm(&self) -> f64 {
        self.generators.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Generators lying in the span of `subset`.
    fn span_closure(&self, subset: &[usize]) -> Result<Vec<usize>> {
        let vs: Vec<DVector<f64>> = subset.iter().map(|&i| self.generators[i].clone()).collect();
        let span = Subspace::span(self.dim, &vs)?;
        Ok((0..self.generators.len())
            .filter(|&i| {
                let v = &self.generators[i];
                (v - span.project(v)).norm() <= SPAN_TOL * v.norm()
            })
            .collect())
    }

    /// Whether some `c` is orthogonal to the generators in `subset` and has
    /// `sign_i * <c, v_i> < 0` for every other generator.
    fn is_face_direction(&self, subset: &[usize], signs: &[f64]) -> bool {
        let d = self.dim;
        let scale = self.max_norm();
        let in_subset: BTreeSet<usize> = subset.iter().copied().collect();
        // Variables: c+ (d), c- (d), margin (1).
        let nvars = 2 * d + 1;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for (i, v) in self.generators.iter().enumerate() {
            let v = v / scale;
            let mut row = alloc::vec![0.0; nvars];
            if in_subset.contains(&i) {
                for r in 0..d {
                    row[r] = v[r];
                    row[d + r] = -v[r];
                }
                rows.push(row.clone());
                rhs.push(0.0);
                rows.push(row.iter().map(|x| -x).collect());
                rhs.push(0.0);
            } else {
                let s = signs[i];
                for r in 0..d {
                    row[r] = s * v[r];
                    row[d + r] = -s * v[r];
                }
                row[2 * d] = 1.0;
                rows.push(row);
                rhs.push(0.0);
            }
        }
        for r in 0..2 * d {
            let mut row = alloc::vec![0.0; nvars];
            row[r] = 1.0;
            rows.push(row);
            rhs.push(1.0);
        }
        let mut cap = alloc::vec![0.0; nvars];
        cap[2 * d] = 1.0;
        rows.push(cap);
        rhs.push(d as f64 + 1.0);
        let mut objective = alloc::vec![0.0; nvars];
        objective[2 * d] = 1.0;
        match maximize(&objective, &rows, &rhs) {
            LpOutcome::Optimal(margin) => margin > FEASIBILITY_MARGIN,
            LpOutcome::Unbounded => true,
        }
    }

    /// All `j`-faces containing the origin, ordered by generating subset.
    ///
    /// `j = 0` yields the origin itself (volume 1, the counting measure).
    pub fn faces_at_origin(&self, j: usize) -> Result<Vec<ZonotopeFace>> {
        let d = self.dim;
        let m = self.generators.len();
        if j > d {
            return Err(Error::InvalidArgument(alloc::format!("face dimension {j} exceeds {d}")));
        }
        if j == 0 {
            return Ok(alloc::vec![ZonotopeFace {
                subset: Vec::new(),
                dim: 0,
                volume: 1.0,
                span_frame: Subspace::trivial(d),
            }]);
        }
        let all_negative = alloc::vec![1.0; m];
        let mut faces = Vec::new();
        for subset in self.parallel_classes(j)? {
            if j < d && !self.is_face_direction(&subset, &all_negative) {
                continue;
            }
            let vs: Vec<DVector<f64>> = subset.iter().map(|&i| self.generators[i].clone()).collect();
            faces.push(ZonotopeFace {
                volume: self.face_volume(&subset)?,
                span_frame: Subspace::span(d, &vs)?,
                dim: j,
                subset,
            });
        }
        Ok(faces)
    }

    /// `j`-dimensional volume of `sum_{i in S} [0, v_i]`, `j = dim span`.
    pub fn face_volume(&self, subset: &[usize]) -> Result<f64> {
        face_volume(subset, self)
    }

    /// Number of faces of each dimension `0..=d`.
    ///
    /// Every face is a translate of the sub-zonotope spanned by one parallel
    /// class (generators spanning a common flat); the translates of a class
    /// correspond to the feasible sign patterns of the remaining generators.
    /// Enumerates sign patterns, so it is meant for small generator counts.
    pub fn face_census(&self) -> Result<Vec<usize>> {
        let m = self.generators.len();
        let mut counts = alloc::vec![0usize; self.dim + 1];
        for (j, count) in counts.iter_mut().enumerate() {
            for class in self.parallel_classes(j)? {
                let free: Vec<usize> = (0..m).filter(|i| !class.contains(i)).collect();
                for pattern in 0u32..(1u32 << free.len()) {
                    let mut signs = alloc::vec![1.0; m];
                    for (bit, &i) in free.iter().enumerate() {
                        if pattern & (1 << bit) != 0 {
                            signs[i] = -1.0;
                        }
                    }
                    if free.is_empty() || self.is_face_direction(&class, &signs) {
                        *count += 1;
                    }
                }
            }
        }
        Ok(counts)
    }

    /// Distinct generator sets closed under taking the span, of rank `j`.
    fn parallel_classes(&self, j: usize) -> Result<Vec<Vec<usize>>> {
        if j == 0 {
            return Ok(alloc::vec![Vec::new()]);
        }
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for basis in index_subsets(self.generators.len(), j) {
            let vs: Vec<DVector<f64>> = basis.iter().map(|&i| self.generators[i].clone()).collect();
            let scale: f64 = vs.iter().map(|v| v.norm_squared()).product();
            if wedge_norm_sq(&vs) > 1e-20 * scale {
                seen.insert(self.span_closure(&basis)?);
            }
        }
        Ok(seen.into_iter().collect())
    }
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// `j`-dimensional volume of the zonotope generated by `subset`: the
/// generators are expressed in an orthonormal frame of their span and
/// `|det|` is summed over all `j`-subsets.
pub fn face_volume(subset: &[usize], zonotope: &Zonotope) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("face volume needs a nonempty subset".into()));
    }
    let d = zonotope.dim;
    let vs: Vec<DVector<f64>> = subset
        .iter()
        .map(|&i| {
            zonotope
                .generators
                .get(i)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(alloc::format!("generator index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let span = Subspace::span(d, &vs)?;
    let j = span.dim();
    let coords = span.frame().transpose() * DMatrix::from_columns(&vs);
    Ok(index_subsets(vs.len(), j)
        .map(|cols| coords.select_columns(cols.iter()).determinant().abs())
        .sum())
}

/// Mean Euler characteristic of `Z_alpha ∩ W` for a zonotope window:
/// `sum_k (2 pi)^{-(d-k+1)/2} sigma^{k-d} e^{-alpha^2/2sigma^2} H_{d-1-k}(alpha/sigma)
///  sum_{F in F_{d-k}^0} |F| sqrt(Lambda[F_0]) + psi(alpha/sigma)`.
pub fn expected_euler_zonotope(spec: &ExcursionSpec, zonotope: &Zonotope) -> Result<f64> {
    let d = spec.dim();
    if zonotope.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: zonotope.dim() });
    }
    let sigma = spec.model().sigma();
    let t = spec.standardized_level();
    let gauss = libm::exp(-0.5 * t * t);
    let lambda = spec.model().lambda_matrix();
    let mut total = volume_density(spec);
    for k in 0..d {
        let j = d - k;
        let h = hermite((d - 1 - k) as u32, t);
        if h == 0.0 {
            continue;
        }
        let mut face_sum = 0.0;
        for face in zonotope.faces_at_origin(j)? {
            face_sum += face.volume * libm::sqrt(lambda_bracket(lambda, &face.span_frame)?);
        }
        total += libm::pow(2.0 * PI, -(j as f64 + 1.0) / 2.0) * libm::pow(sigma, -(j as f64)) * gauss * h * face_sum;
    }
    Ok(total)
}

/// Mean Euler characteristic from the principal kinematic formula
/// `sum_k beta_{d,k} V_k(Z_alpha) C_{d-k}(W)` for an isotropic field, with
/// `C_0(W), ..., C_d(W)` the total curvature measures of the window.
pub fn expected_euler_pkf_iso(spec: &ExcursionSpec, intrinsic_vols: &[f64]) -> Result<f64> {
    let d = spec.dim();
    if intrinsic_vols.len() != d + 1 {
        return Err(Error::DimensionMismatch { expected: d + 1, found: intrinsic_vols.len() });
    }
    if !spec.model().is_isotropic() {
        return Err(Error::NotIsotropic);
    }
    let mut total = volume_density(spec) * intrinsic_vols[0];
    for k in 0..d {
        total += beta_const(d, k) * curvature_density_iso(spec, k)? * intrinsic_vols[d - k];
    }
    Ok(total)
}

/// Intrinsic volumes `V_0..V_d` of a box: elementary symmetric polynomials
/// of its side lengths.
pub fn intrinsic_volumes_box(sides: &[f64]) -> Result<Vec<f64>> {
    if sides.is_empty() || sides.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("box sides must be positive".into()));
    }
    let mut e = alloc::vec![0.0; sides.len() + 1];
    e[0] = 1.0;
    for (n, &s) in sides.iter().enumerate() {
        for j in (1..=n + 1).rev() {
            e[j] += s * e[j - 1];
        }
    }
    Ok(e)
}

/// Intrinsic volumes `V_j(rB^d) = binom(d, j) kappa_d / kappa_{d-j} r^j`.
pub fn intrinsic_volumes_ball(d: usize, radius: f64) -> Result<Vec<f64>> {
    if d == 0 || !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument("ball needs d >= 1 and a positive radius".into()));
    }
    Ok((0..=d)
        .map(|j| binomial(d, j) * unit_ball_volume(d) / unit_ball_volume(d - j) * libm::pow(radius, j as f64))
        .collect())
}
