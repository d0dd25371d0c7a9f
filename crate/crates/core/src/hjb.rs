//! Per-resource reward functions.
//!
//! Routing a type-`i` arrival to resource `j` with probability `x_ij / Λ_i`
//! thins its Poisson stream to rate `λ_ij(t) = λ_i(t) x_ij / Λ_i`. Resource `j`
//! then faces an independent single-resource admission problem whose value
//! `f_j(t, c)` solves
//!
//! ```text
//! ∂f/∂t (t, c) = -Σ_i λ_ij(t) (r_ij - f(t, c) + f(t, c-1))⁺,  c = 1..C_j
//! f(T, c) = 0,  f(t, 0) = 0
//! ```
//!
//! which is integrated backwards with explicit Euler on a grid containing every
//! rate breakpoint.

use std::io::{self, Write};

use thiserror::Error;

use crate::lp::FluidSolution;
use crate::model::{Instance, RateFunction};

/// `Δt · max_t Σ_i λ_ij(t)` must not exceed this.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Slack applied to monotonicity checks.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum HjbError {
    #[error("step {dt} too coarse for resource {resource}: total rate reaches {max_rate}, need dt <= {required_dt}")]
    Unstable { resource: usize, dt: f64, max_rate: f64, required_dt: f64 },
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// Thinned arrival rates `λ_ij` for every (type, resource) pair.
#[derive(Debug, Clone)]
pub struct SplitRates {
    /// `rates[i][j]`.
    pub rates: Vec<Vec<RateFunction>>,
}

/// Splits each type's stream across resources in proportion to the fluid solution.
pub fn split_rates(instance: &Instance, fluid: &FluidSolution) -> SplitRates {
    let rates = instance
        .types
        .iter()
        .zip(&fluid.x)
        .map(|(ty, row)| {
            let lam = ty.expected_arrivals();
            row.iter()
                .map(|&xij| {
                    let share = if lam > 0.0 { xij / lam } else { 0.0 };
                    ty.rate.scaled(share)
                })
                .collect()
        })
        .collect();
    SplitRates { rates }
}

/// The arrival streams that reach one resource after routing.
#[derive(Debug, Clone)]
pub struct ResourceArrivals {
    pub resource: usize,
    pub capacity: u32,
    pub horizon: f64,
    /// `(λ_ij, r_ij)` for every type with a non-zero stream.
    pub streams: Vec<(RateFunction, f64)>,
}

impl ResourceArrivals {
    pub fn max_total_rate(&self) -> f64 {
        let mut points: Vec<f64> =
            self.streams.iter().flat_map(|(r, _)| r.pieces.iter().map(|p| p.start)).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
            .into_iter()
            .map(|t| self.streams.iter().map(|(r, _)| r.rate_at(t)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `Σ_i r_ij Λ_ij`, an upper bound on any reward the resource can earn.
    pub fn reward_mass(&self) -> f64 {
        self.streams.iter().map(|(r, w)| w * r.integral()).sum()
    }
}

impl SplitRates {
    pub fn for_resource(&self, instance: &Instance, j: usize) -> ResourceArrivals {
        let streams = self
            .rates
            .iter()
            .enumerate()
            .filter(|(_, row)| row[j].max_rate() > 0.0)
            .map(|(i, row)| (row[j].clone(), instance.reward(i, j)))
            .collect();
        ResourceArrivals {
            resource: j,
            capacity: instance.resources[j].capacity,
            horizon: instance.horizon,
            streams,
        }
    }
}

/// Default grid step: `min(1e-3 T, stability bound)`.
pub fn default_step(horizon: f64, max_total_rate: f64) -> f64 {
    let base = 1e-3 * horizon;
    if max_total_rate > 0.0 {
        base.min(STABILITY_LIMIT / max_total_rate)
    } else {
        base
    }
}

/// Discretised `f_j(t, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    pub resource: usize,
    pub capacity: u32,
    /// Grid step requested; actual steps may be shorter so breakpoints land on the grid.
    pub dt: f64,
    times: Vec<f64>,
    /// Row-major `(times.len()) × (capacity + 1)`.
    values: Vec<f64>,
}

impl RewardFunction {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    fn width(&self) -> usize {
        self.capacity as usize + 1
    }

    /// `f` at grid index `n` with `c` units left.
    pub fn value(&self, n: usize, c: u32) -> f64 {
        self.values[n * self.width() + c as usize]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.width();
        &self.values[n * w..(n + 1) * w]
    }

    /// Index of the last grid point at or before `t`.
    pub fn grid_index(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64, c: u32) -> f64 {
        self.value(self.grid_index(t), c)
    }

    /// Bid price `f(t, c) - f(t, c-1)`; `+∞` when nothing is left.
    pub fn marginal(&self, t: f64, c: u32) -> f64 {
        if c == 0 {
            return f64::INFINITY;
        }
        debug_assert!(c <= self.capacity, "capacity {c} above {}", self.capacity);
        let row = self.row(self.grid_index(t));
        row[c as usize] - row[c as usize - 1]
    }

    /// `f(0, C_j)`, the expected reward collected from this resource.
    pub fn initial_value(&self) -> f64 {
        self.value(0, self.capacity)
    }

    /// Largest amount by which marginals increase in `c` anywhere on the grid.
    /// Zero means `f` is concave in remaining capacity.
    pub fn max_concavity_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..self.n_points() {
            let row = self.row(n);
            for c in 1..row.len().saturating_sub(1) {
                let lower = row[c] - row[c - 1];
                let upper = row[c + 1] - row[c];
                worst = worst.max(upper - lower);
            }
        }
        worst
    }

    /// Writes rows `t,c,f` (no header when `header` is false).
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "resource,t,c,f")?;
        }
        for (n, &t) in self.times.iter().enumerate() {
            for c in 0..=self.capacity {
                writeln!(w, "{},{},{},{}", self.resource, t, c, self.value(n, c))?;
            }
        }
        Ok(())
    }
}

fn grid_breakpoints(arrivals: &ResourceArrivals) -> Vec<f64> {
    let horizon = arrivals.horizon;
    let mut pts: Vec<f64> = vec![0.0, horizon];
    for (rate, _) in &arrivals.streams {
        pts.extend(rate.breakpoints().filter(|&t| t > 0.0 && t < horizon));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon.max(1.0));
    pts
}

/// Backward explicit-Euler sweep of the reward-function HJB for one resource.
pub fn compute_reward_function(arrivals: &ResourceArrivals, dt: f64) -> Result<RewardFunction, HjbError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(HjbError::BadStep(dt));
    }
    let cap = arrivals.capacity as usize;
    let width = cap + 1;
    let breaks = grid_breakpoints(arrivals);

    // Per segment: step count and the (rate, reward) pairs active on it.
    let mut segments = Vec::with_capacity(breaks.len().saturating_sub(1));
    let mut max_rate: f64 = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let active: Vec<(f64, f64)> = arrivals
            .streams
            .iter()
            .map(|(rate, reward)| (rate.rate_at(mid), *reward))
            .filter(|&(l, _)| l > 0.0)
            .collect();
        max_rate = max_rate.max(active.iter().map(|&(l, _)| l).sum());
        let steps = ((b - a) / dt).ceil().max(1.0) as usize;
        segments.push((a, b, steps, active));
    }
    if dt * max_rate > STABILITY_LIMIT * (1.0 + 1e-12) {
        return Err(HjbError::Unstable {
            resource: arrivals.resource,
            dt,
            max_rate,
            required_dt: STABILITY_LIMIT / max_rate,
        });
    }

    let mut times = Vec::new();
    for &(a, b, steps, _) in &segments {
        let h = (b - a) / steps as f64;
        times.extend((0..steps).map(|s| a + s as f64 * h));
    }
    times.push(arrivals.horizon);
    let n_points = times.len();
    let mut values = vec![0.0; n_points * width];

    // Walk segments backwards; `n` is the grid index being filled.
    let mut n = n_points - 1;
    for (a, b, steps, active) in segments.iter().rev() {
        let h = (b - a) / *steps as f64;
        for _ in 0..*steps {
            n -= 1;
            let (head, tail) = values.split_at_mut((n + 1) * width);
            let next = &tail[..width];
            let cur = &mut head[n * width..];
            cur[0] = 0.0;
            for c in 1..width {
                let gain: f64 = active
                    .iter()
                    .map(|&(lam, r)| lam * (r - next[c] + next[c - 1]).max(0.0))
                    .sum();
                let v = next[c] + h * gain;
                cur[c] = v.max(next[c]).max(cur[c - 1]);
            }
        }
    }
    debug_assert_eq!(n, 0);

    Ok(RewardFunction { resource: arrivals.resource, capacity: arrivals.capacity, dt, times, values })
}

/// Reward functions for every resource, using `dt` or the default step when `None`.
pub fn compute_all(
    instance: &Instance,
    split: &SplitRates,
    dt: Option<f64>,
) -> Result<Vec<RewardFunction>, HjbError> {
    use rayon::prelude::*;
    (0..instance.n_resources())
        .into_par_iter()
        .map(|j| {
            let arrivals = split.for_resource(instance, j);
            let step = dt.unwrap_or_else(|| default_step(instance.horizon, arrivals.max_total_rate()));
            compute_reward_function(&arrivals, step)
        })
        .collect()
}
