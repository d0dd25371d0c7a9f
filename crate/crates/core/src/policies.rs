//! Online decision rules.
//!
//! Every policy answers the same question: a type-`i` customer arrives at time
//! `t` and `state.remaining` units are left; assign a resource or reject.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::hjb::RewardFunction;
use crate::lp::FluidSolution;
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    Assign(usize),
}

/// Remaining capacity `c_j(t)` and the time of the last decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub remaining: Vec<u32>,
    pub clock: f64,
}

impl PolicyState {
    pub fn new(instance: &Instance) -> Self {
        PolicyState { remaining: instance.capacities(), clock: 0.0 }
    }

    pub fn available(&self, j: usize) -> bool {
        self.remaining[j] > 0
    }
}

pub trait Policy: Send + Sync {
    fn kind(&self) -> PolicyKind;

    /// Decides for a type-`customer_type` arrival at time `t`. Randomised
    /// policies draw from `rng`; deterministic ones leave it untouched.
    fn decide(&self, state: &PolicyState, customer_type: usize, t: f64, rng: &mut dyn RngCore) -> Decision;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Separation,
    Maa,
    Greedy,
    BidPrice,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::Separation, PolicyKind::Maa, PolicyKind::Greedy, PolicyKind::BidPrice];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Separation => "separation",
            PolicyKind::Maa => "maa",
            PolicyKind::Greedy => "greedy",
            PolicyKind::BidPrice => "bidprice",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separation" => Ok(PolicyKind::Separation),
            "maa" => Ok(PolicyKind::Maa),
            "greedy" => Ok(PolicyKind::Greedy),
            "bidprice" => Ok(PolicyKind::BidPrice),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

fn reward_matrix(instance: &Instance) -> Vec<Vec<f64>> {
    instance.types.iter().map(|t| t.rewards.clone()).collect()
}

/// Random routing by the fluid solution, then per-resource admission control.
#[derive(Debug, Clone)]
pub struct Separation {
    rewards: Vec<Vec<f64>>,
    /// Cumulative routing probabilities `Σ_{l<=j} x_il / Λ_i`.
    routing_cdf: Vec<Vec<f64>>,
    reward_functions: Arc<Vec<RewardFunction>>,
}

impl Separation {
    pub fn new(instance: &Instance, fluid: &FluidSolution, reward_functions: Arc<Vec<RewardFunction>>) -> Self {
        let routing_cdf = instance
            .types
            .iter()
            .zip(&fluid.x)
            .map(|(ty, row)| {
                let lam = ty.expected_arrivals();
                let mut acc = 0.0;
                row.iter()
                    .map(|&x| {
                        if lam > 0.0 {
                            acc += x / lam;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Separation { rewards: reward_matrix(instance), routing_cdf, reward_functions }
    }

    /// Candidate resource for a uniform draw `u`, or `None` for the residual mass.
    pub fn route(&self, customer_type: usize, u: f64) -> Option<usize> {
        let cdf = &self.routing_cdf[customer_type];
        let j = cdf.partition_point(|&c| c <= u);
        (j < cdf.len()).then_some(j)
    }

    /// Admission test once the candidate is known.
    pub fn admit(&self, state: &PolicyState, customer_type: usize, j: usize, t: f64) -> Decision {
        let c = state.remaining[j];
        if c > 0 && self.rewards[customer_type][j] >= self.reward_functions[j].marginal(t, c) {
            Decision::Assign(j)
        } else {
            Decision::Reject
        }
    }
}

impl Policy for Separation {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Separation
    }

    fn decide(&self, state: &PolicyState, customer_type: usize, t: f64, rng: &mut dyn RngCore) -> Decision {
        // exactly one draw per arrival keeps routing streams aligned
        let u: f64 = rng.random();
        match self.route(customer_type, u) {
            Some(j) => self.admit(state, customer_type, j, t),
            None => Decision::Reject,
        }
    }
}

/// Marginal allocation: reward-function marginals used as time-varying bid prices.
#[derive(Debug, Clone)]
pub struct MarginalAllocation {
    rewards: Vec<Vec<f64>>,
    reward_functions: Arc<Vec<RewardFunction>>,
}

impl MarginalAllocation {
    pub fn new(instance: &Instance, reward_functions: Arc<Vec<RewardFunction>>) -> Self {
        MarginalAllocation { rewards: reward_matrix(instance), reward_functions }
    }

    /// Decision given explicit bid prices, one per resource.
    pub fn decide_with_prices(rewards: &[f64], remaining: &[u32], prices: &[f64]) -> Decision {
        let mut best: Option<(usize, f64)> = None;
        for (j, (&r, &p)) in rewards.iter().zip(prices).enumerate() {
            if remaining[j] == 0 {
                continue;
            }
            let margin = r - p;
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((j, margin));
            }
        }
        match best {
            Some((j, m)) if m >= 0.0 => Decision::Assign(j),
            _ => Decision::Reject,
        }
    }

    pub fn prices(&self, state: &PolicyState, t: f64) -> Vec<f64> {
        self.reward_functions
            .iter()
            .zip(&state.remaining)
            .map(|(f, &c)| f.marginal(t, c))
            .collect()
    }
}

impl Policy for MarginalAllocation {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Maa
    }

    fn decide(&self, state: &PolicyState, customer_type: usize, t: f64, _rng: &mut dyn RngCore) -> Decision {
        let prices = self.prices(state, t);
        Self::decide_with_prices(&self.rewards[customer_type], &state.remaining, &prices)
    }
}

/// Most-preferred available resource; rejects when nothing positive is left.
#[derive(Debug, Clone)]
pub struct Greedy {
    rewards: Vec<Vec<f64>>,
}

impl Greedy {
    pub fn new(instance: &Instance) -> Self {
        Greedy { rewards: reward_matrix(instance) }
    }
}

impl Policy for Greedy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Greedy
    }

    fn decide(&self, state: &PolicyState, customer_type: usize, _t: f64, _rng: &mut dyn RngCore) -> Decision {
        let mut best: Option<(usize, f64)> = None;
        for (j, &r) in self.rewards[customer_type].iter().enumerate() {
            if state.available(j) && best.is_none_or(|(_, b)| r > b) {
                best = Some((j, r));
            }
        }
        match best {
            Some((j, r)) if r > 0.0 => Decision::Assign(j),
            _ => Decision::Reject,
        }
    }
}

/// Static bid prices from the fluid LP's capacity duals.
#[derive(Debug, Clone)]
pub struct BidPrice {
    rewards: Vec<Vec<f64>>,
    prices: Vec<f64>,
}

impl BidPrice {
    pub fn new(instance: &Instance, fluid: &FluidSolution) -> Self {
        Self::with_prices(instance, fluid.capacity_duals.clone())
    }

    pub fn with_prices(instance: &Instance, prices: Vec<f64>) -> Self {
        BidPrice { rewards: reward_matrix(instance), prices }
    }
}

impl Policy for BidPrice {
    fn kind(&self) -> PolicyKind {
        PolicyKind::BidPrice
    }

    fn decide(&self, state: &PolicyState, customer_type: usize, _t: f64, _rng: &mut dyn RngCore) -> Decision {
        let rewards = &self.rewards[customer_type];
        let mut best: Option<usize> = None;
        for (j, (&r, &p)) in rewards.iter().zip(&self.prices).enumerate() {
            if !state.available(j) || p > r {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) => {
                    let (pb, rb) = (self.prices[b], rewards[b]);
                    if p < pb || (p == pb && r > rb) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.map_or(Decision::Reject, Decision::Assign)
    }
}
