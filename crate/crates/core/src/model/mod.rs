//! Domain types for advance-admission instances.
//!
//! An [`Instance`] couples a horizon `[0, T]`, a list of capacitated
//! [`Resource`]s and a list of [`CustomerType`]s, each arriving as a
//! non-homogeneous Poisson process with a piecewise-constant
//! [`RateFunction`] and earning `rewards[j]` when assigned to resource `j`.

mod generate;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{gen_clinic_instance, gen_random_instance, ClinicParams, RandomParams};
pub use io::{from_json_str, load_instance, save_instance, to_json_string, SCHEMA_VERSION};

/// Relative slack used when checking that rate pieces tile the horizon.
const COVERAGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },
    #[error("instance failed validation:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}

/// One constant-rate stretch `[start, end)` of a rate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePiece {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

impl RatePiece {
    pub fn new(start: f64, end: f64, rate: f64) -> Self {
        RatePiece { start, end, rate }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn mass(&self) -> f64 {
        self.rate * self.len()
    }
}

/// Piecewise-constant arrival intensity covering `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub pieces: Vec<RatePiece>,
}

impl RateFunction {
    pub fn new(pieces: Vec<RatePiece>) -> Self {
        RateFunction { pieces }
    }

    pub fn constant(horizon: f64, rate: f64) -> Self {
        RateFunction::new(vec![RatePiece::new(0.0, horizon, rate)])
    }

    /// Builds a rate function from breakpoints `0 = b_0 < ... < b_p = T` and
    /// one rate per interval.
    pub fn from_breakpoints(breaks: &[f64], rates: &[f64]) -> Self {
        assert_eq!(breaks.len(), rates.len() + 1, "need one more breakpoint than rates");
        let pieces = breaks
            .windows(2)
            .zip(rates)
            .map(|(w, &r)| RatePiece::new(w[0], w[1], r))
            .collect();
        RateFunction::new(pieces)
    }

    pub fn horizon(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.end)
    }

    /// Total expected number of arrivals.
    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(RatePiece::mass).sum()
    }

    /// Expected arrivals in `[a, b]`.
    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let lo = p.start.max(a);
                let hi = p.end.min(b);
                if hi > lo {
                    p.rate * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Rate on the piece containing `t` (right-continuous; `t = T` maps to the
    /// last piece).
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.pieces.partition_point(|p| p.end <= t);
        match self.pieces.get(idx) {
            Some(p) if p.start <= t => p.rate,
            Some(_) => 0.0,
            None => self.pieces.last().map_or(0.0, |p| if t <= p.end { p.rate } else { 0.0 }),
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.pieces.iter().map(|p| p.rate).fold(0.0, f64::max)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces
            .first()
            .map(|p| p.start)
            .into_iter()
            .chain(self.pieces.iter().map(|p| p.end))
    }

    pub fn scaled(&self, factor: f64) -> RateFunction {
        RateFunction::new(
            self.pieces
                .iter()
                .map(|p| RatePiece::new(p.start, p.end, p.rate * factor))
                .collect(),
        )
    }

    /// True if the rate is positive on some piece reaching past `t`.
    pub fn active_after(&self, t: f64) -> bool {
        self.pieces.iter().any(|p| p.rate > 0.0 && p.end > t && p.end > p.start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resource {
    pub capacity: u32,
    /// Time after which the resource can no longer earn reward.
    pub expiry: Option<f64>,
}

impl Resource {
    pub fn new(capacity: u32) -> Self {
        Resource { capacity, expiry: None }
    }

    pub fn with_expiry(capacity: u32, expiry: f64) -> Self {
        Resource { capacity, expiry: Some(expiry) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerType {
    pub rate: RateFunction,
    /// `rewards[j]` is earned when this type is assigned to resource `j`.
    pub rewards: Vec<f64>,
}

impl CustomerType {
    pub fn new(rate: RateFunction, rewards: Vec<f64>) -> Self {
        CustomerType { rate, rewards }
    }

    /// `Λ_i`, the expected number of arrivals over the horizon.
    pub fn expected_arrivals(&self) -> f64 {
        self.rate.integral()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub horizon: f64,
    pub resources: Vec<Resource>,
    pub types: Vec<CustomerType>,
}

impl Instance {
    pub fn new(horizon: f64, resources: Vec<Resource>, types: Vec<CustomerType>) -> Self {
        Instance { horizon, resources, types }
    }

    pub fn n_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn reward(&self, i: usize, j: usize) -> f64 {
        self.types[i].rewards[j]
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.resources.iter().map(|r| r.capacity).collect()
    }

    pub fn expected_arrivals(&self) -> Vec<f64> {
        self.types.iter().map(CustomerType::expected_arrivals).collect()
    }

    pub fn min_capacity(&self) -> u32 {
        self.resources.iter().map(|r| r.capacity).min().unwrap_or(0)
    }

    /// Returns every violated invariant; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// `Ok(self)` when valid, otherwise [`ModelError::Invalid`].
    pub fn validated(self) -> Result<Self, ModelError> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Horizon,
    Coverage,
    Rate,
    Capacity,
    Expiry,
    RewardShape,
    Reward,
    ExpiryConsistency,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Horizon => "horizon",
            ViolationKind::Coverage => "rate coverage",
            ViolationKind::Rate => "rate value",
            ViolationKind::Capacity => "capacity",
            ViolationKind::Expiry => "expiry range",
            ViolationKind::RewardShape => "reward shape",
            ViolationKind::Reward => "reward value",
            ViolationKind::ExpiryConsistency => "expiry consistency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Path to the offending item, e.g. `types[2].rate_pieces[1]`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind.as_str(), self.location, self.message)
    }
}

/// Checks every structural invariant of `instance`, including the rule that a
/// type still arriving after a resource's expiry must earn zero from it.
pub fn validate(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, location: String, message: String| {
        out.push(Violation { kind, location, message })
    };
    let horizon = instance.horizon;
    if !(horizon.is_finite() && horizon > 0.0) {
        push(ViolationKind::Horizon, "horizon".into(), format!("must be finite and > 0, got {horizon}"));
    }
    let tol = COVERAGE_TOL * horizon.abs().max(1.0);
    let n = instance.resources.len();

    for (j, res) in instance.resources.iter().enumerate() {
        if res.capacity < 1 {
            push(ViolationKind::Capacity, format!("resources[{j}].capacity"), "must be >= 1".into());
        }
        if let Some(e) = res.expiry {
            if !(e.is_finite() && (0.0..=horizon).contains(&e)) {
                push(
                    ViolationKind::Expiry,
                    format!("resources[{j}].expiry"),
                    format!("{e} outside [0, {horizon}]"),
                );
            }
        }
    }

    for (i, ty) in instance.types.iter().enumerate() {
        let pieces = &ty.rate.pieces;
        if pieces.is_empty() {
            push(ViolationKind::Coverage, format!("types[{i}].rate_pieces"), "no pieces".into());
        } else {
            if pieces[0].start.abs() > tol {
                push(
                    ViolationKind::Coverage,
                    format!("types[{i}].rate_pieces[0]"),
                    format!("starts at {} instead of 0", pieces[0].start),
                );
            }
            let last = pieces.len() - 1;
            if (pieces[last].end - horizon).abs() > tol {
                push(
                    ViolationKind::Coverage,
                    format!("types[{i}].rate_pieces[{last}]"),
                    format!("ends at {} instead of horizon {horizon}", pieces[last].end),
                );
            }
            for (p, piece) in pieces.iter().enumerate() {
                if !(piece.start.is_finite() && piece.end.is_finite()) || piece.end <= piece.start {
                    push(
                        ViolationKind::Coverage,
                        format!("types[{i}].rate_pieces[{p}]"),
                        format!("empty or non-finite interval [{}, {}]", piece.start, piece.end),
                    );
                }
                if !(piece.rate.is_finite() && piece.rate >= 0.0) {
                    push(
                        ViolationKind::Rate,
                        format!("types[{i}].rate_pieces[{p}]"),
                        format!("rate {} must be finite and >= 0", piece.rate),
                    );
                }
                if p > 0 && (piece.start - pieces[p - 1].end).abs() > tol {
                    push(
                        ViolationKind::Coverage,
                        format!("types[{i}].rate_pieces[{p}]"),
                        format!(
                            "starts at {} but previous piece ends at {}",
                            piece.start,
                            pieces[p - 1].end
                        ),
                    );
                }
            }
        }

        if ty.rewards.len() != n {
            push(
                ViolationKind::RewardShape,
                format!("types[{i}].rewards"),
                format!("has {} entries for {n} resources", ty.rewards.len()),
            );
        }
        for (j, &r) in ty.rewards.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                push(
                    ViolationKind::Reward,
                    format!("types[{i}].rewards[{j}]"),
                    format!("reward {r} must be finite and >= 0"),
                );
            }
        }

        for (j, res) in instance.resources.iter().enumerate() {
            let (Some(expiry), Some(&r)) = (res.expiry, ty.rewards.get(j)) else {
                continue;
            };
            if r != 0.0 && ty.rate.active_after(expiry) {
                push(
                    ViolationKind::ExpiryConsistency,
                    format!("types[{i}].rewards[{j}]"),
                    format!("type arrives after resource {j} expires at {expiry} but has reward {r}"),
                );
            }
        }
    }
    out
}

/// One arrival: `(time, customer type)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub customer_type: usize,
}

/// A realised, time-sorted arrival sequence together with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSample {
    pub events: Vec<Arrival>,
    pub seed: u64,
}

impl ArrivalSample {
    /// Realised demand `δ_i` per type.
    pub fn counts(&self, n_types: usize) -> Vec<u64> {
        let mut c = vec![0u64; n_types];
        for e in &self.events {
            c[e.customer_type] += 1;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| {
            w[0].time < w[1].time || (w[0].time == w[1].time && w[0].customer_type <= w[1].customer_type)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(reward: f64, expiry: Option<f64>) -> Instance {
        Instance::new(
            1.0,
            vec![Resource { capacity: 1, expiry }],
            vec![CustomerType::new(RateFunction::constant(1.0, 1.0), vec![reward])],
        )
    }

    #[test]
    fn single_type_single_resource_is_valid() {
        assert!(single(1.0, None).validate().is_empty());
    }

    #[test]
    fn all_zero_rewards_are_valid_even_with_expiry() {
        assert!(single(0.0, Some(0.5)).validate().is_empty());
    }

    #[test]
    fn reward_after_expiry_is_flagged() {
        let v = single(1.0, Some(0.5)).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ExpiryConsistency);
        assert_eq!(v[0].location, "types[0].rewards[0]");
    }

    #[test]
    fn arrivals_only_before_expiry_may_earn() {
        let rate = RateFunction::from_breakpoints(&[0.0, 0.5, 1.0], &[2.0, 0.0]);
        let inst = Instance::new(
            1.0,
            vec![Resource::with_expiry(2, 0.5)],
            vec![CustomerType::new(rate, vec![0.7])],
        );
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn gaps_and_bad_values_are_reported() {
        let rate = RateFunction::new(vec![RatePiece::new(0.0, 0.4, 1.0), RatePiece::new(0.5, 1.0, -1.0)]);
        let inst = Instance::new(
            1.0,
            vec![Resource::new(0)],
            vec![CustomerType::new(rate, vec![f64::NAN, 1.0])],
        );
        let kinds: Vec<_> = inst.validate().iter().map(|v| v.kind).collect();
        for k in [
            ViolationKind::Coverage,
            ViolationKind::Rate,
            ViolationKind::Capacity,
            ViolationKind::RewardShape,
            ViolationKind::Reward,
        ] {
            assert!(kinds.contains(&k), "missing {k:?} in {kinds:?}");
        }
    }

    #[test]
    fn missing_coverage_of_horizon_is_invalid() {
        let rate = RateFunction::constant(0.8, 1.0);
        let inst = Instance::new(1.0, vec![Resource::new(1)], vec![CustomerType::new(rate, vec![1.0])]);
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Coverage);
    }

    #[test]
    fn rate_lookup_is_right_continuous() {
        let r = RateFunction::from_breakpoints(&[0.0, 1.0, 3.0], &[1.0, 3.0]);
        assert_eq!(r.rate_at(0.0), 1.0);
        assert_eq!(r.rate_at(0.999), 1.0);
        assert_eq!(r.rate_at(1.0), 3.0);
        assert_eq!(r.rate_at(3.0), 3.0);
        assert_eq!(r.rate_at(3.5), 0.0);
        assert!((r.integral_between(0.5, 2.0) - 3.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn integral_is_sum_of_piece_areas(
            cuts in proptest::collection::vec(0.01f64..1.0, 1..8),
            rates in proptest::collection::vec(0.0f64..50.0, 8),
        ) {
            let mut breaks = vec![0.0];
            for c in &cuts {
                let last = *breaks.last().unwrap();
                breaks.push(last + c);
            }
            let rates = &rates[..cuts.len()];
            let f = RateFunction::from_breakpoints(&breaks, rates);
            let direct: f64 = breaks.windows(2).zip(rates).map(|(w, r)| r * (w[1] - w[0])).sum();
            let lam = f.integral();
            prop_assert!((lam - direct).abs() <= 1e-12 * direct.max(1e-300));
            prop_assert!((f.integral_between(0.0, f.horizon()) - lam).abs() <= 1e-12 * lam.max(1.0));
        }
    }
}
