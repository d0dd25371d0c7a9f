//! The bounded Poisson process.
//!
//! A unit-rate Poisson counter `R(t)` on `[0, k]` is capped by a barrier that
//! sits at level 0 on `[0, t_1)`, at level 1 on `[t_1, t_2)`, and so on up to
//! level `k-1` on `[t_{k-1}, k]`. With the barrier at level `b` the occupation
//! probabilities `p_i(t) = P(R(t) = i)` evolve as
//!
//! ```text
//! p_i' = p_{i-1} - p_i   for i < b
//! p_b' = p_{b-1}         (the barrier holds the process)
//! ```
//!
//! and `p_i = 0` above the barrier.

use super::BoundsError;

/// Classical RK4 on the active states `0..=level`.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

fn derivative(p: &[f64], level: usize, out: &mut [f64]) {
    for i in 0..=level {
        let inflow = if i > 0 { p[i - 1] } else { 0.0 };
        let outflow = if i < level { p[i] } else { 0.0 };
        out[i] = inflow - outflow;
    }
}

impl Rk4 {
    pub(crate) fn new(k: usize) -> Self {
        Rk4 { k1: vec![0.0; k], k2: vec![0.0; k], k3: vec![0.0; k], k4: vec![0.0; k], tmp: vec![0.0; k] }
    }

    /// Advances `p` by `dt` and returns the RK4 estimate of `∫ p_level` over the step.
    pub(crate) fn step(&mut self, p: &mut [f64], level: usize, dt: f64) -> f64 {
        self.advance(p, level, dt, None)
    }

    /// Like [`Rk4::step`], also adding `∫ p_i` over the step to `areas[i]` for every active `i`.
    pub(crate) fn step_with_areas(&mut self, p: &mut [f64], level: usize, dt: f64, areas: &mut [f64]) -> f64 {
        self.advance(p, level, dt, Some(areas))
    }

    fn advance(&mut self, p: &mut [f64], level: usize, dt: f64, mut areas: Option<&mut [f64]>) -> f64 {
        let a = level + 1;
        let half = 0.5 * dt;
        let sixth = dt / 6.0;
        let mut add = |weight: f64, state: &[f64]| {
            if let Some(areas) = areas.as_deref_mut() {
                for i in 0..a {
                    areas[i] += weight * sixth * state[i];
                }
            }
        };
        let s1 = p[level];
        add(1.0, p);
        derivative(p, level, &mut self.k1);
        for i in 0..a {
            self.tmp[i] = p[i] + half * self.k1[i];
        }
        let s2 = self.tmp[level];
        add(2.0, &self.tmp);
        derivative(&self.tmp, level, &mut self.k2);
        for i in 0..a {
            self.tmp[i] = p[i] + half * self.k2[i];
        }
        let s3 = self.tmp[level];
        add(2.0, &self.tmp);
        derivative(&self.tmp, level, &mut self.k3);
        for i in 0..a {
            self.tmp[i] = p[i] + dt * self.k3[i];
        }
        let s4 = self.tmp[level];
        add(1.0, &self.tmp);
        derivative(&self.tmp, level, &mut self.k4);
        for i in 0..a {
            p[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        sixth * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    }
}

/// Times closer than this are treated as equal when stepping.
fn time_eps(k: usize) -> f64 {
    1e-13 * k as f64
}

/// Outcome of building barriers for one `β`.
#[derive(Debug, Clone, PartialEq)]
pub enum Barriers {
    /// `t_1..t_{k-1}` and the area of `p_{k-1}` over `[t_{k-1}, k]`.
    Feasible { times: Vec<f64>, final_area: f64 },
    /// Some barrier would have to be placed after `k`.
    Infeasible { level: usize },
}

/// Places each barrier `t_{i+1}` where `∫_{t_i}^{t} p_i` first reaches
/// `1/β - 1`, then integrates the last level up to `k`.
pub fn construct_barriers(k: usize, beta: f64, h: f64) -> Result<Barriers, BoundsError> {
    if k == 0 {
        return Err(BoundsError::BadCapacity);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(BoundsError::BadBeta(beta));
    }
    check_step(h)?;
    let target = 1.0 / beta - 1.0;
    let horizon = k as f64;
    let eps = time_eps(k);
    let mut rk = Rk4::new(k);
    let mut p = vec![0.0; k];
    p[0] = 1.0;
    let mut t = 0.0;
    let mut times = Vec::with_capacity(k.saturating_sub(1));
    let mut saved = vec![0.0; k];

    for level in 0..k - 1 {
        let mut area = 0.0;
        loop {
            if horizon - t <= eps {
                return Ok(Barriers::Infeasible { level });
            }
            let dt = h.min(horizon - t);
            saved[..=level].copy_from_slice(&p[..=level]);
            let gained = rk.step(&mut p, level, dt);
            if area + gained >= target {
                let s = crossing_substep(&mut rk, &saved, level, target - area, dt, gained);
                p[..=level].copy_from_slice(&saved[..=level]);
                rk.step(&mut p, level, s);
                t += s;
                break;
            }
            area += gained;
            t += dt;
        }
        times.push(t);
    }

    let level = k - 1;
    let mut final_area = 0.0;
    while horizon - t > eps {
        let dt = h.min(horizon - t);
        final_area += rk.step(&mut p, level, dt);
        t += dt;
    }
    Ok(Barriers::Feasible { times, final_area })
}

/// Finds `s ∈ (0, dt]` with RK4 area over `[0, s]` equal to `need`, by
/// safeguarded Newton starting from linear interpolation.
fn crossing_substep(rk: &mut Rk4, start: &[f64], level: usize, need: f64, dt: f64, full: f64) -> f64 {
    let mut work = start.to_vec();
    let (mut lo, mut hi) = (0.0, dt);
    let mut s = if full > 0.0 { (dt * need / full).clamp(0.0, dt) } else { dt };
    for _ in 0..100 {
        work[..=level].copy_from_slice(&start[..=level]);
        let area = rk.step(&mut work, level, s);
        let f = area - need;
        if f.abs() <= 1e-16 * need.max(1e-300) || hi - lo <= 1e-16 * dt {
            break;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let slope = work[level];
        let newton = if slope > 0.0 { s - f / slope } else { f64::NAN };
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    s
}

pub(crate) fn check_step(h: f64) -> Result<(), BoundsError> {
    if !(h.is_finite() && h > 0.0 && h <= 1e-3) {
        return Err(BoundsError::BadStep(h));
    }
    Ok(())
}

/// Occupation probabilities of the bounded process for fixed barrier times.
///
/// The trajectory is not stored; [`BoundedProcess::walk`] re-integrates it on
/// demand, using the same step sequence as [`construct_barriers`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedProcess {
    pub k: usize,
    pub barriers: Vec<f64>,
    pub h: f64,
    /// `P(R(k) = i)`.
    pub terminal: Vec<f64>,
    /// `max_t |Σ_i p_i(t) - 1|`.
    pub max_mass_error: f64,
}

/// One grid point of a walk.
pub struct GridPoint<'a> {
    pub t: f64,
    /// Barrier level in force on the step that ends at `t` (0 at `t = 0`).
    pub level: usize,
    pub p: &'a [f64],
    /// `∫_0^t p_i(s) ds`.
    pub integrals: &'a [f64],
}

/// Integrates the process for given barriers `0 < t_1 <= ... <= t_{k-1} < k`.
pub fn integrate_bounded(k: usize, barriers: &[f64], h: f64) -> Result<BoundedProcess, BoundsError> {
    if k == 0 {
        return Err(BoundsError::BadCapacity);
    }
    check_step(h)?;
    if barriers.len() != k - 1 {
        return Err(BoundsError::BarrierOrder(format!("need {} barrier times, got {}", k - 1, barriers.len())));
    }
    let mut prev = 0.0;
    for (i, &b) in barriers.iter().enumerate() {
        if !(b.is_finite() && b > 0.0 && b >= prev && b < k as f64) {
            return Err(BoundsError::BarrierOrder(format!("t_{} = {b} breaks 0 < t_1 <= ... < k", i + 1)));
        }
        prev = b;
    }
    let mut process =
        BoundedProcess { k, barriers: barriers.to_vec(), h, terminal: Vec::new(), max_mass_error: 0.0 };
    let mut terminal = Vec::new();
    let mut mass_err: f64 = 0.0;
    process.walk(|pt| {
        mass_err = mass_err.max((pt.p.iter().sum::<f64>() - 1.0).abs());
        terminal.clear();
        terminal.extend_from_slice(pt.p);
    });
    process.terminal = terminal;
    process.max_mass_error = mass_err;
    Ok(process)
}

impl BoundedProcess {
    /// Calls `visit` at `t = 0` and after every integration step.
    pub fn walk(&self, mut visit: impl FnMut(&GridPoint<'_>)) {
        let k = self.k;
        let horizon = k as f64;
        let eps = time_eps(k);
        let mut rk = Rk4::new(k);
        let mut p = vec![0.0; k];
        p[0] = 1.0;
        let mut integrals = vec![0.0; k];
        visit(&GridPoint { t: 0.0, level: 0, p: &p, integrals: &integrals });
        let mut t = 0.0;
        for level in 0..k {
            let end = if level + 1 < k { self.barriers[level] } else { horizon };
            while end - t > eps {
                let dt = self.h.min(end - t);
                rk.step_with_areas(&mut p, level, dt, &mut integrals);
                t += dt;
                if (end - t).abs() <= eps {
                    t = end;
                }
                visit(&GridPoint { t, level, p: &p, integrals: &integrals });
            }
        }
    }

    /// `P(R(t) = i)` for `i = 0..k` at every grid point with `t` in `times`
    /// (nearest grid point at or after each requested time).
    pub fn sample(&self, times: &[f64]) -> Vec<(f64, Vec<f64>)> {
        let mut out = Vec::with_capacity(times.len());
        let mut next = 0;
        self.walk(|pt| {
            while next < times.len() && pt.t >= times[next] - 1e-12 {
                out.push((pt.t, pt.p.to_vec()));
                next += 1;
            }
        });
        out
    }

    /// `Σ_i i P(R(k) = i)`.
    pub fn terminal_mean(&self) -> f64 {
        self.terminal.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }
}
