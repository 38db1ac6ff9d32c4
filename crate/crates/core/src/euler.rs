//! Euler characteristic of thresholded grids through the vertex rule: a
//! `j`-dimensional grid cell belongs to the complex iff all `2^j` of its
//! vertices are set.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Boolean mask on a `n_1 x ... x n_d` grid of spacing `h`, stored
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    shape: Vec<usize>,
    mask: Vec<bool>,
    spacing: f64,
}

impl BinaryGrid {
    pub fn new(shape: Vec<usize>, mask: Vec<bool>, spacing: f64) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument("grid shape must be nonempty with positive extents".into()));
        }
        let len: usize = shape.iter().product();
        if mask.len() != len {
            return Err(Error::DimensionMismatch { expected: len, found: mask.len() });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        Ok(Self { shape, mask, spacing })
    }

    /// Excursion mask `values >= alpha`.
    pub fn threshold(shape: Vec<usize>, values: &[f64], alpha: f64, spacing: f64) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| v >= alpha).collect(), spacing)
    }

    /// Mask from a predicate on the multi-index.
    pub fn from_fn(shape: Vec<usize>, spacing: f64, mut f: impl FnMut(&[usize]) -> bool) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut mask = Vec::with_capacity(len);
        for _ in 0..len {
            mask.push(f(&idx));
            for a in (0..shape.len()).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self::new(shape, mask, spacing)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn get(&self, idx: &[usize]) -> bool {
        self.mask[self.offset(idx)]
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.shape.len()];
        for a in (0..self.shape.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }
}

/// Cell counts `N_0..N_d` of the vertex-rule complex.
pub fn cell_counts(grid: &BinaryGrid) -> Vec<u64> {
    let d = grid.dim();
    let strides = grid.strides();
    let len = grid.mask.len();
    // Position of each flat index along every axis, to test `p_a + 1 < n_a`.
    let coord = |p: usize, a: usize| (p / strides[a]) % grid.shape[a];
    let mut counts = vec![0u64; d + 1];
    // cells[s][p]: the cell at lower corner p spanning the axes in bitmask s is present.
    let mut cells: Vec<Vec<bool>> = Vec::with_capacity(1 << d);
    cells.push(grid.mask.clone());
    counts[0] = grid.mask.iter().filter(|&&b| b).count() as u64;
    for s in 1usize..(1 << d) {
        let a = s.trailing_zeros() as usize;
        let base = &cells[s & (s - 1)];
        let step = strides[a];
        let layer: Vec<bool> = (0..len)
            .map(|p| base[p] && coord(p, a) + 1 < grid.shape[a] && base[p + step])
            .collect();
        counts[s.count_ones() as usize] += layer.iter().filter(|&&b| b).count() as u64;
        cells.push(layer);
    }
    counts
}

/// Euler characteristic `sum_j (-1)^j N_j` of the vertex-rule complex.
pub fn euler_char(grid: &BinaryGrid) -> i64 {
    cell_counts(grid)
        .iter()
        .enumerate()
        .map(|(j, &n)| if j % 2 == 0 { n as i64 } else { -(n as i64) })
        .sum()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Planar Euler characteristic as connected components minus holes.
///
/// Components are found on the set vertices joined by grid edges; holes are
/// the bounded components of the complement, built from the unfilled
/// squares, which communicate across every edge that is not in the complex.
pub fn euler_char_2d_oracle(grid: &BinaryGrid) -> Result<i64> {
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: grid.dim() });
    }
    let (rows, cols) = (grid.shape[0], grid.shape[1]);
    let on = |r: usize, c: usize| grid.mask[r * cols + c];

    let mut verts = UnionFind::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if on(r, c) && c + 1 < cols && on(r, c + 1) {
                verts.union(r * cols + c, r * cols + c + 1);
            }
            if on(r, c) && r + 1 < rows && on(r + 1, c) {
                verts.union(r * cols + c, (r + 1) * cols + c);
            }
        }
    }
    let mut components = 0i64;
    for p in 0..rows * cols {
        if grid.mask[p] && verts.find(p) == p {
            components += 1;
        }
    }

    let (sr, sc) = (rows.saturating_sub(1), cols.saturating_sub(1));
    let outer = sr * sc;
    let mut squares = UnionFind::new(outer + 1);
    let filled = |r: usize, c: usize| on(r, c) && on(r + 1, c) && on(r, c + 1) && on(r + 1, c + 1);
    for r in 0..sr {
        for c in 0..sc {
            if filled(r, c) {
                continue;
            }
            let here = r * sc + c;
            // Top edge (r, c)-(r, c+1), bottom edge (r+1, c)-(r+1, c+1),
            // left edge (r, c)-(r+1, c), right edge (r, c+1)-(r+1, c+1).
            let top_open = !(on(r, c) && on(r, c + 1));
            let bottom_open = !(on(r + 1, c) && on(r + 1, c + 1));
            let left_open = !(on(r, c) && on(r + 1, c));
            let right_open = !(on(r, c + 1) && on(r + 1, c + 1));
            if top_open {
                if r == 0 {
                    squares.union(here, outer);
                } else if !filled(r - 1, c) {
                    squares.union(here, here - sc);
                }
            }
            if bottom_open && r + 1 == sr {
                squares.union(here, outer);
            }
            if left_open {
                if c == 0 {
                    squares.union(here, outer);
                } else if !filled(r, c - 1) {
                    squares.union(here, here - 1);
                }
            }
            if right_open && c + 1 == sc {
                squares.union(here, outer);
            }
        }
    }
    let outer_root = squares.find(outer);
    let mut holes = 0i64;
    for r in 0..sr {
        for c in 0..sc {
            let p = r * sc + c;
            if !filled(r, c) && squares.find(p) == p && p != outer_root {
                holes += 1;
            }
        }
    }
    Ok(components - holes)
}
