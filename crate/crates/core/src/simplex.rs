//! Dense primal simplex for `max c^T x  s.t.  A x <= b, x >= 0` with `b >= 0`,
//! so the origin is a feasible starting vertex. Bland's rule keeps the
//! heavily degenerate face-feasibility programs from cycling.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpOutcome {
    Optimal(f64),
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-12;

pub fn maximize(objective: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> LpOutcome {
    let n = objective.len();
    let m = rows.len();
    debug_assert!(rhs.iter().all(|&b| b >= 0.0), "origin must be feasible");
    let width = n + m + 1;
    // Row-major tableau; last column holds the right-hand side.
    let mut t: Vec<f64> = alloc::vec![0.0; (m + 1) * width];
    for (r, row) in rows.iter().enumerate() {
        debug_assert_eq!(row.len(), n);
        t[r * width..r * width + n].copy_from_slice(row);
        t[r * width + n + r] = 1.0;
        t[r * width + width - 1] = rhs[r];
    }
    // Objective row stores reduced costs c_j - z_j.
    let obj = m * width;
    t[obj..obj + n].copy_from_slice(objective);
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..n + m).find(|&j| t[obj + j] > PIVOT_EPS) else {
            return LpOutcome::Optimal(-t[obj + width - 1]);
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[r * width + width - 1] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_EPS
                            || (ratio <= lratio + PIVOT_EPS && basis[r] < basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        let pivot = t[pr * width + enter];
        for c in 0..width {
            t[pr * width + c] /= pivot;
        }
        for r in 0..=m {
            if r == pr {
                continue;
            }
            let factor = t[r * width + enter];
            if factor != 0.0 {
                for c in 0..width {
                    t[r * width + c] -= factor * t[pr * width + c];
                }
            }
        }
        basis[pr] = enter;
    }
}
