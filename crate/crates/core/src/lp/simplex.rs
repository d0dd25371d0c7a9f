//! Dense primal simplex for `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Bland's rule picks the lowest-index improving column and, among tied
//! ratios, the row whose basic variable has the lowest index; the returned
//! vertex is therefore a deterministic function of the input.

/// Absolute tolerance on reduced costs, pivots and residuals.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow price of each constraint row (`>= 0`).
    pub duals: Vec<f64>,
    /// `b - A x` per row.
    pub slacks: Vec<f64>,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows` constraint rows followed by the objective row; the last column is the rhs.
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        for v in &mut self.cells[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.cells[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.cells[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.cells[r * w..(r + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }
}

/// Solves `max c·x  s.t.  a x <= b, x >= 0`. Panics if `b` has a negative entry
/// or the problem is unbounded (neither can happen for the matching LPs).
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpSolution {
    let nv = c.len();
    let rows = a.len();
    assert_eq!(rows, b.len(), "one rhs per constraint row");
    assert!(b.iter().all(|&v| v >= 0.0), "rhs must be nonnegative");
    let width = nv + rows + 1;
    let mut cells = vec![0.0; (rows + 1) * width];
    for (r, row) in a.iter().enumerate() {
        assert_eq!(row.len(), nv);
        cells[r * width..r * width + nv].copy_from_slice(row);
        cells[r * width + nv + r] = 1.0;
        cells[r * width + width - 1] = b[r];
    }
    for (j, &cj) in c.iter().enumerate() {
        cells[rows * width + j] = -cj;
    }
    let mut t = Tableau { rows, width, cells, basis: (nv..nv + rows).collect() };

    let mut pivots = 0;
    loop {
        let Some(pc) = (0..nv + rows).find(|&j| t.at(rows, j) < -TOL) else {
            break;
        };
        let mut best: Option<(usize, f64)> = None;
        for r in 0..rows {
            let arc = t.at(r, pc);
            if arc <= TOL {
                continue;
            }
            let ratio = t.rhs(r) / arc;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    if ratio < bratio - TOL || ((ratio - bratio).abs() <= TOL && t.basis[r] < t.basis[br]) {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        let (pr, _) = best.expect("unbounded LP");
        t.pivot(pr, pc);
        pivots += 1;
    }

    let mut x = vec![0.0; nv];
    for (r, &bv) in t.basis.iter().enumerate() {
        if bv < nv {
            x[bv] = t.rhs(r).max(0.0);
        }
    }
    let duals = (0..rows).map(|r| t.at(rows, nv + r).max(0.0)).collect();
    let slacks = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| bi - row.iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>())
        .collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpSolution { x, objective, duals, slacks, pivots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let s = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        );
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        // duals (0, 1.5, 1): b·y = 36
        assert!((s.duals[0]).abs() < 1e-12);
        assert!((s.duals[1] - 1.5).abs() < 1e-12);
        assert!((s.duals[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_is_degenerate_but_terminates() {
        let s = maximize(&[1.0, 1.0], &[vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]], &[0.0, 0.0, 2.0]);
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_improving_column_returns_origin() {
        let s = maximize(&[0.0, -1.0], &[vec![1.0, 1.0]], &[3.0]);
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.pivots, 0);
    }
}
