//! Competitive-ratio bounds for the separation policy.
//!
//! For a resource of capacity `k` the worst case is revealed by a time-homogenised
//! single-resource problem on `[0, k]`. Its dual is solved by the occupation
//! probabilities of a bounded Poisson process ([`process`]) scaled by `β*`.

mod process;
mod worst_case;

use thiserror::Error;

use crate::poisson;

pub use process::{construct_barriers, integrate_bounded, Barriers, BoundedProcess, GridPoint};
pub use worst_case::worst_case_ratio;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("capacity k must be at least 1")]
    BadCapacity,
    #[error("beta {0} must lie in (0, 1)")]
    BadBeta(f64),
    #[error("integration step {0} must lie in (0, 1e-3]")]
    BadStep(f64),
    #[error("invalid barrier times: {0}")]
    BarrierOrder(String),
    #[error("could not bracket beta*: residual curve {0:?}")]
    Bracketing(Vec<(f64, f64)>),
    #[error("reward profile: {0}")]
    Profile(String),
}

/// Default integration step for capacity `k`.
pub fn default_step(k: usize) -> f64 {
    (1e-4 * k as f64).min(1e-3)
}

/// Default bisection tolerance on `β`.
pub const BETA_TOL: f64 = 1e-8;

/// Residuals this small (area units) are taken as roots.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub k: usize,
    pub beta_star: f64,
    /// `t_1..t_{k-1}`.
    pub barriers: Vec<f64>,
    /// `P(R(k) = i)` for `i = 0..k`.
    pub terminal: Vec<f64>,
    /// `∫_{t_{k-1}}^k p_{k-1} - (1/β* - 1)`.
    pub residual: f64,
    pub max_mass_error: f64,
    pub h: f64,
    pub iterations: usize,
}

impl BoundResult {
    pub fn process(&self) -> BoundedProcess {
        BoundedProcess {
            k: self.k,
            barriers: self.barriers.clone(),
            h: self.h,
            terminal: self.terminal.clone(),
            max_mass_error: self.max_mass_error,
        }
    }

    /// `max_i (t_i - i)`; nonpositive when every barrier respects `t_i <= i`.
    pub fn barrier_excess(&self) -> f64 {
        self.barriers
            .iter()
            .enumerate()
            .map(|(i, &t)| t - (i + 1) as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signed final-interval residual at `β`; `None` when the barriers do not fit in `[0, k]`.
fn residual_at(k: usize, beta: f64, h: f64) -> Result<Option<(f64, Vec<f64>)>, BoundsError> {
    Ok(match construct_barriers(k, beta, h)? {
        Barriers::Feasible { times, final_area } => Some((final_area - (1.0 / beta - 1.0), times)),
        Barriers::Infeasible { .. } => None,
    })
}

/// Finds `β*(k)` by bisection on the final-interval residual, which increases in `β`.
pub fn solve_beta_star(k: usize, h: f64, tol: f64) -> Result<BoundResult, BoundsError> {
    if k == 0 {
        return Err(BoundsError::BadCapacity);
    }
    if !(tol > 0.0) {
        return Err(BoundsError::BadBeta(tol));
    }
    let mut curve = Vec::new();
    let mut iterations = 0;
    let mut eval = |beta: f64, curve: &mut Vec<(f64, f64)>| -> Result<f64, BoundsError> {
        iterations += 1;
        let r = residual_at(k, beta, h)?.map_or(f64::NEG_INFINITY, |(r, _)| r);
        curve.push((beta, r));
        Ok(r)
    };

    let mut hi = 1.0 - 1e-6;
    let mut lo = (1.0 / (1.0 + k as f64)).max(0.4);
    let r_hi = eval(hi, &mut curve)?;
    if r_hi < 0.0 {
        return Err(BoundsError::Bracketing(curve));
    }
    let mut r_lo = eval(lo, &mut curve)?;
    while r_lo > RESIDUAL_TOL {
        if lo < 1e-6 {
            return Err(BoundsError::Bracketing(curve));
        }
        hi = lo;
        lo *= 0.5;
        r_lo = eval(lo, &mut curve)?;
    }

    if r_lo.abs() <= RESIDUAL_TOL {
        hi = lo;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid, &mut curve)?;
        if r.abs() <= RESIDUAL_TOL {
            lo = mid;
            hi = mid;
        } else if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut beta = 0.5 * (lo + hi);
    let (residual, barriers) = match residual_at(k, beta, h)? {
        Some(found) => found,
        None => residual_at(k, hi, h)?.map(|found| {
            beta = hi;
            found
        }).ok_or(BoundsError::Bracketing(curve.clone()))?,
    };
    let process = integrate_bounded(k, &barriers, h)?;
    Ok(BoundResult {
        k,
        beta_star: beta,
        barriers,
        terminal: process.terminal,
        residual,
        max_mass_error: process.max_mass_error,
        h,
        iterations,
    })
}

/// Largest violation of each constraint family of the dual problem under
/// `α_i(t) = β* p_i(t)`, checked at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCheck {
    /// `α_0(t) + ∫_0^t α_0 - 1`.
    pub first: f64,
    /// `α_i(t) + ∫_0^t α_i - ∫_0^t α_{i-1}`, `i >= 1`.
    pub second: f64,
    /// `β* - Σ_i α_i(t)`.
    pub third: f64,
    /// `-α_i(t)`.
    pub fourth: f64,
    /// `max_t |Σ_i α_i(t) - β*|`.
    pub sum_deviation: f64,
    /// `max_{t >= t_1} |α_0(t) + ∫_0^t α_0 - 1|`.
    pub first_slack_after_t1: f64,
}

impl DualCheck {
    pub fn max_residual(&self) -> f64 {
        self.first.max(self.second).max(self.third).max(self.fourth).max(0.0)
    }
}

pub fn verify_dual_feasibility(bound: &BoundResult, process: &BoundedProcess) -> DualCheck {
    let beta = bound.beta_star;
    let t1 = process.barriers.first().copied().unwrap_or(process.k as f64);
    let mut check = DualCheck {
        first: f64::NEG_INFINITY,
        second: f64::NEG_INFINITY,
        third: f64::NEG_INFINITY,
        fourth: f64::NEG_INFINITY,
        sum_deviation: 0.0,
        first_slack_after_t1: 0.0,
    };
    process.walk(|pt| {
        let first = beta * (pt.p[0] + pt.integrals[0]) - 1.0;
        check.first = check.first.max(first);
        if pt.t >= t1 {
            check.first_slack_after_t1 = check.first_slack_after_t1.max(first.abs());
        }
        for i in 1..pt.p.len() {
            let v = beta * (pt.p[i] + pt.integrals[i] - pt.integrals[i - 1]);
            check.second = check.second.max(v);
        }
        let sum: f64 = pt.p.iter().map(|p| beta * p).sum();
        check.third = check.third.max(beta - sum);
        check.sum_deviation = check.sum_deviation.max((sum - beta).abs());
        for &p in pt.p {
            check.fourth = check.fourth.max(-beta * p);
        }
    });
    check
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    /// `|β* - 1/2 - (1/2k) Σ_i i β* P(R(k) = i)|`.
    pub lemma: f64,
    /// `|k (1 - β*) - β* (k - Σ_i i P(R(k) = i))|`, which is `2k` times `lemma`.
    pub eq9: f64,
}

pub fn lemma_identity_check(bound: &BoundResult) -> LemmaCheck {
    let k = bound.k as f64;
    let beta = bound.beta_star;
    let mean: f64 = bound.terminal.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    LemmaCheck {
        lemma: (beta - 0.5 - beta * mean / (2.0 * k)).abs(),
        eq9: (k * (1.0 - beta) - beta * (k - mean)).abs(),
    }
}

/// Closed-form lower bound on `β*(k)` in terms of the Poisson(`k`) pmf `P_i`:
/// `1 / (1 + (1/k)[Σ_{i>=2k-1} i P_i + 2 Σ_{i=1}^{k-1} i P_{k+i-1}])`.
pub fn closed_form_bound(k: usize) -> f64 {
    assert!(k >= 1);
    let kf = k as f64;
    let upper = poisson::sum_upward(2 * k as u64 - 1, kf, |i| i as f64);
    let middle: f64 = (1..k as u64).map(|i| i as f64 * poisson::pmf(k as u64 + i - 1, kf)).sum();
    1.0 / (1.0 + (upper + 2.0 * middle) / kf)
}

/// `1 / (1 + 2[P(N >= k)/k + P(N = k)])` for `N ~ Poisson(k)`.
pub fn asymptotic_bound(k: usize) -> f64 {
    assert!(k >= 1);
    let kf = k as f64;
    let k64 = k as u64;
    1.0 / (1.0 + 2.0 * (poisson::tail(k64, kf) / kf + poisson::pmf(k64, kf)))
}

/// Leading terms `1 - √(2/π)/√k` of [`asymptotic_bound`] for large `k`.
pub fn asymptotic_expansion(k: usize) -> f64 {
    1.0 - (2.0 / std::f64::consts::PI).sqrt() / (k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_one_is_one_half() {
        let b = solve_beta_star(1, 1e-3, BETA_TOL).unwrap();
        assert_eq!(b.beta_star, 0.5);
        assert!(b.barriers.is_empty());
        assert_eq!(b.terminal, vec![1.0]);
        let l = lemma_identity_check(&b);
        assert!(l.lemma < 1e-15);
    }

    #[test]
    fn capacity_two_matches_transcendental_root() {
        let b = solve_beta_star(2, 1e-4, BETA_TOL).unwrap();
        let beta = b.beta_star;
        assert!((beta - 0.615).abs() < 1e-3, "{beta}");
        let lhs = 3.0 * beta + beta * (1.0 / beta - 3.0).exp();
        assert!((lhs - 2.0).abs() < 1e-6, "{lhs}");
        assert!((b.barriers[0] - (1.0 / beta - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn capacity_two_terminal_distribution_is_analytic() {
        // p_0(2) = e^{-(2 - t_1)}
        let b = solve_beta_star(2, 1e-4, BETA_TOL).unwrap();
        let exact = (-(2.0 - b.barriers[0])).exp();
        assert!((b.terminal[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn dual_checks_small_k() {
        for k in 1..=6 {
            let b = solve_beta_star(k, default_step(k), BETA_TOL).unwrap();
            let d = verify_dual_feasibility(&b, &b.process());
            assert!(d.max_residual() <= 5e-4, "k={k} {d:?}");
            assert!(d.sum_deviation < 1e-8, "k={k} {d:?}");
            assert!(d.first_slack_after_t1 < 1e-6, "k={k} {d:?}");
            let l = lemma_identity_check(&b);
            assert!(l.lemma < 1e-5, "k={k} {l:?}");
            assert!((l.eq9 / (2.0 * k as f64) - l.lemma).abs() < 1e-10);
            assert!(b.barrier_excess() <= 1e-6);
        }
    }

    #[test]
    fn step_refinement_is_stable() {
        for k in [3, 7] {
            let a = solve_beta_star(k, 2e-4, 1e-10).unwrap().beta_star;
            let b = solve_beta_star(k, 1e-4, 1e-10).unwrap().beta_star;
            assert!((a - b).abs() < 1e-5, "k={k}: {a} {b}");
        }
    }

    #[test]
    fn closed_forms_at_one() {
        assert!((closed_form_bound(1) - 0.5).abs() < 1e-14);
        assert!((asymptotic_bound(1) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn closed_forms_ordered_and_increasing() {
        let mut prev = 0.0;
        for k in 1..=50 {
            let c = closed_form_bound(k);
            let a = asymptotic_bound(k);
            assert!(a <= c + 1e-9, "k={k}: {a} > {c}");
            assert!(c >= prev - 1e-12, "k={k}");
            prev = c;
        }
    }

    #[test]
    fn asymptotic_rate() {
        let k = 10_000;
        let scaled = (1.0 - asymptotic_bound(k)) * (k as f64).sqrt();
        assert!((scaled - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.05, "{scaled}");
        assert!((asymptotic_bound(k) - asymptotic_expansion(k)).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(solve_beta_star(0, 1e-3, 1e-8), Err(BoundsError::BadCapacity));
        assert!(matches!(solve_beta_star(2, 1e-2, 1e-8), Err(BoundsError::BadStep(_))));
    }
}
