//! The offline matching LP and its fluid relaxation.
//!
//! Both share the transportation shape
//!
//! ```text
//! max  sum_ij r_ij x_ij
//! s.t. sum_j x_ij <= supply_i     (one row per customer type)
//!      sum_i x_ij <= C_j          (one row per resource)
//!      x >= 0
//! ```
//!
//! with `supply = Λ` for the fluid bound and `supply = δ` for the offline optimum.

pub mod simplex;

use crate::model::Instance;

pub use simplex::TOL;

/// Optimal solution of the fluid LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    /// `x[i][j]`, expected type-`i` customers sent to resource `j`.
    pub x: Vec<Vec<f64>>,
    /// LP optimum; an upper bound on the expected offline optimum.
    pub objective: f64,
    /// `π_j`, dual of each capacity row.
    pub capacity_duals: Vec<f64>,
    /// `μ_i`, dual of each demand row.
    pub demand_duals: Vec<f64>,
    /// `Λ_i - sum_j x_ij`.
    pub row_slacks: Vec<f64>,
    /// `C_j - sum_i x_ij`.
    pub col_slacks: Vec<f64>,
}

impl FluidSolution {
    pub fn n_types(&self) -> usize {
        self.x.len()
    }

    pub fn n_resources(&self) -> usize {
        self.capacity_duals.len()
    }
}

/// Optimum of the offline LP for one realised demand vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub objective: f64,
    pub x: Vec<Vec<f64>>,
}

impl OfflineSolution {
    /// Largest distance of any entry from the nearest integer.
    pub fn integrality_gap(&self) -> f64 {
        self.x.iter().flatten().map(|v| (v - v.round()).abs()).fold(0.0, f64::max)
    }
}

struct Transport {
    x: Vec<Vec<f64>>,
    objective: f64,
    row_duals: Vec<f64>,
    col_duals: Vec<f64>,
    row_slacks: Vec<f64>,
    col_slacks: Vec<f64>,
}

fn solve_transport(instance: &Instance, supply: &[f64]) -> Transport {
    let m = instance.n_types();
    let n = instance.n_resources();
    assert_eq!(supply.len(), m);
    let nv = m * n;
    let mut c = vec![0.0; nv];
    for i in 0..m {
        for j in 0..n {
            c[i * n + j] = instance.reward(i, j);
        }
    }
    let mut a = Vec::with_capacity(m + n);
    for i in 0..m {
        let mut row = vec![0.0; nv];
        row[i * n..(i + 1) * n].fill(1.0);
        a.push(row);
    }
    for j in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        a.push(row);
    }
    let mut b = supply.to_vec();
    b.extend(instance.resources.iter().map(|r| r.capacity as f64));

    let sol = simplex::maximize(&c, &a, &b);
    let x = (0..m).map(|i| sol.x[i * n..(i + 1) * n].to_vec()).collect();
    Transport {
        x,
        objective: sol.objective,
        row_duals: sol.duals[..m].to_vec(),
        col_duals: sol.duals[m..].to_vec(),
        row_slacks: sol.slacks[..m].to_vec(),
        col_slacks: sol.slacks[m..].to_vec(),
    }
}

/// Solves the fluid relaxation, which replaces realised demand by `Λ_i`.
pub fn solve_fluid(instance: &Instance) -> FluidSolution {
    let t = solve_transport(instance, &instance.expected_arrivals());
    FluidSolution {
        x: t.x,
        objective: t.objective,
        capacity_duals: t.col_duals,
        demand_duals: t.row_duals,
        row_slacks: t.row_slacks,
        col_slacks: t.col_slacks,
    }
}

/// Offline optimum `OPT(δ)` for realised demand `delta`.
pub fn solve_offline(instance: &Instance, delta: &[u64]) -> OfflineSolution {
    let supply: Vec<f64> = delta.iter().map(|&d| d as f64).collect();
    let t = solve_transport(instance, &supply);
    OfflineSolution { objective: t.objective, x: t.x }
}
