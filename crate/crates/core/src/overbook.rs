//! Overbooking through virtual slots.
//!
//! With no-show probability `p_j` and denial cost `D_j`, the `k`-th unit booked
//! beyond capacity `C_j` costs in expectation
//!
//! ```text
//! o_j(k) = D_j (1 - p_j) P(Bin(C_j + k - 1, p_j) <= k - 1)
//! ```
//!
//! Each such unit becomes a unit-capacity virtual slot paying
//! `max(r_ij - o_j(k), 0)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::model::{CustomerType, Instance, ModelError, Resource};
use crate::policies::Decision;
use crate::sim::TraceEntry;

/// Per-resource overbooking parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverbookSpec {
    pub no_show: Vec<f64>,
    pub denial_cost: Vec<f64>,
    pub max_virtual: Vec<u32>,
}

impl OverbookSpec {
    pub fn uniform(n_resources: usize, no_show: f64, denial_cost: f64, max_virtual: u32) -> Self {
        OverbookSpec {
            no_show: vec![no_show; n_resources],
            denial_cost: vec![denial_cost; n_resources],
            max_virtual: vec![max_virtual; n_resources],
        }
    }

    fn check(&self, n: usize) -> Result<(), ModelError> {
        if self.no_show.len() != n || self.denial_cost.len() != n || self.max_virtual.len() != n {
            return Err(ModelError::Parameter(format!("overbooking spec must cover all {n} resources")));
        }
        for (j, (&p, &d)) in self.no_show.iter().zip(&self.denial_cost).enumerate() {
            if !(0.0..1.0).contains(&p) {
                return Err(ModelError::Parameter(format!("no-show probability {p} of resource {j} not in [0, 1)")));
            }
            if !(d.is_finite() && d >= 0.0) {
                return Err(ModelError::Parameter(format!("denial cost {d} of resource {j} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// `ln n! - ln(√(2πn) (n/e)^n)`.
fn stirling_error(n: f64) -> f64 {
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// `x ln(x/m) + m - x` without cancellation for `x ≈ m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1.. {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                break;
            }
            s = next;
        }
        return s;
    }
    x * (x / m).ln() + m - x
}

fn binomial_term(l: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if l == 0 {
        return (n as f64 * (-p).ln_1p()).exp();
    }
    if l == n {
        return (n as f64 * p.ln()).exp();
    }
    let (x, nf) = (l as f64, n as f64);
    let lc = stirling_error(nf) - stirling_error(x) - stirling_error(nf - x) - deviance(x, nf * p) - deviance(nf - x, nf * q);
    lc.exp() * (nf / (2.0 * PI * x * (nf - x))).sqrt()
}

/// Binomial(`n`, `p`) probabilities `P(X = l)`, `l = 0..=n`, each evaluated in
/// log space through its saddle-point form.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    if p == 0.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[0] = 1.0;
        return v;
    }
    (0..=n).map(|l| binomial_term(l, n, p)).collect()
}

/// Expected marginal cost of the `k`-th overbooked unit (`k >= 1`).
pub fn overbook_cost(capacity: u32, k: u32, no_show: f64, denial_cost: f64) -> f64 {
    assert!(k >= 1, "overbooked units are numbered from 1");
    let n = (capacity + k - 1) as u64;
    let pmf = binomial_pmf(n, no_show);
    let head: f64 = pmf[..k as usize].iter().sum();
    let at_most = if head > 0.5 { 1.0 - pmf[k as usize..].iter().rev().sum::<f64>() } else { head };
    denial_cost * (1.0 - no_show) * at_most.clamp(0.0, 1.0)
}

/// Where a slot of the expanded instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotOrigin {
    pub resource: usize,
    /// `None` for the regular capacity, `Some(k)` for the `k`-th virtual slot.
    pub virtual_index: Option<u32>,
}

/// An expanded instance and the mapping needed to account for overbooking cost.
#[derive(Debug, Clone, PartialEq)]
pub struct OverbookedInstance {
    pub instance: Instance,
    pub slots: Vec<SlotOrigin>,
    /// `costs[j][k-1] = o_j(k)`.
    pub costs: Vec<Vec<f64>>,
    /// Rewards of the original instance, `original_rewards[i][j]`.
    pub original_rewards: Vec<Vec<f64>>,
}

/// Replaces every resource `j` by its regular capacity followed by
/// `max_virtual[j]` unit virtual slots in increasing `k`.
pub fn expand_instance(instance: &Instance, spec: &OverbookSpec) -> Result<OverbookedInstance, ModelError> {
    let n = instance.n_resources();
    spec.check(n)?;
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let c = instance.resources[j].capacity;
            (1..=spec.max_virtual[j])
                .map(|k| overbook_cost(c, k, spec.no_show[j], spec.denial_cost[j]))
                .collect()
        })
        .collect();

    let mut resources = Vec::new();
    let mut slots = Vec::new();
    for (j, res) in instance.resources.iter().enumerate() {
        resources.push(res.clone());
        slots.push(SlotOrigin { resource: j, virtual_index: None });
        for k in 1..=spec.max_virtual[j] {
            resources.push(Resource { capacity: 1, expiry: res.expiry });
            slots.push(SlotOrigin { resource: j, virtual_index: Some(k) });
        }
    }
    let types = instance
        .types
        .iter()
        .map(|ty| {
            let rewards = slots
                .iter()
                .map(|s| {
                    let r = ty.rewards[s.resource];
                    match s.virtual_index {
                        None => r,
                        Some(k) => (r - costs[s.resource][k as usize - 1]).max(0.0),
                    }
                })
                .collect();
            CustomerType::new(ty.rate.clone(), rewards)
        })
        .collect();
    Ok(OverbookedInstance {
        instance: Instance::new(instance.horizon, resources, types),
        slots,
        costs,
        original_rewards: instance.types.iter().map(|t| t.rewards.clone()).collect(),
    })
}

/// Reward accounting of one simulated trace on an expanded instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NetReward {
    /// `Σ r_ij` over accepted customers, with original rewards.
    pub gross: f64,
    /// `Σ_j Σ_{k=1}^{b_j} o_j(k)`.
    pub overbooking_cost: f64,
    /// `gross - overbooking_cost`.
    pub net: f64,
    /// Reward the simulator credited (adjusted virtual-slot rewards).
    pub slot_reward: f64,
    /// Virtual slots used per original resource.
    pub virtual_used: Vec<u32>,
    /// True when each resource's virtual slots were taken as `1..=b_j`, all at
    /// positive adjusted reward; then `slot_reward == net`.
    pub in_fill_order: bool,
}

impl OverbookedInstance {
    pub fn n_original_resources(&self) -> usize {
        self.costs.len()
    }

    /// Cumulative cost `Σ_{k=1}^{b} o_j(k)`.
    pub fn cumulative_cost(&self, j: usize, b: u32) -> f64 {
        self.costs[j][..b as usize].iter().sum()
    }

    pub fn account(&self, trace: &[TraceEntry]) -> NetReward {
        let n = self.n_original_resources();
        let mut gross = 0.0;
        let mut slot_reward = 0.0;
        let mut used: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut in_fill_order = true;
        for e in trace {
            let Decision::Assign(s) = e.decision else { continue };
            let origin = self.slots[s];
            gross += self.original_rewards[e.customer_type][origin.resource];
            slot_reward += e.reward;
            if let Some(k) = origin.virtual_index {
                used[origin.resource].push(k);
                if self.instance.reward(e.customer_type, s) <= 0.0 {
                    in_fill_order = false;
                }
            }
        }
        let mut overbooking_cost = 0.0;
        let mut virtual_used = Vec::with_capacity(n);
        for (j, ks) in used.iter_mut().enumerate() {
            ks.sort_unstable();
            if ks.iter().enumerate().any(|(idx, &k)| k != idx as u32 + 1) {
                in_fill_order = false;
            }
            let b = ks.len() as u32;
            overbooking_cost += self.cumulative_cost(j, b);
            virtual_used.push(b);
        }
        NetReward { gross, overbooking_cost, net: gross - overbooking_cost, slot_reward, virtual_used, in_fill_order }
    }
}
