//! Arrival sampling and replicated policy experiments.
//!
//! Replication `r` of an experiment with base seed `s` uses the seed
//! `derive_seed(s, r)`. Arrivals and the separation policy's routing draws
//! come from two distinct ChaCha20 streams keyed by that seed, and every policy
//! sees the same arrival sample (common random numbers).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::hjb::{self, HjbError, RewardFunction, SplitRates};
use crate::lp::{self, FluidSolution};
use crate::model::{Arrival, ArrivalSample, Instance};
use crate::policies::{BidPrice, Decision, Greedy, MarginalAllocation, Policy, PolicyKind, PolicyState, Separation};

/// Generator recorded in output manifests.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9), streams: 0 = arrivals, 1 = routing; replication seeds via splitmix64";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Arrivals = 0,
    Routing = 1,
}

/// Seed of replication `replication` under `base`; one splitmix64 round.
pub fn derive_seed(base: u64, replication: u64) -> u64 {
    let mut z = base ^ replication.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws one arrival sequence: per type and rate piece a Poisson count, then
/// uniform times within the piece. Events are sorted by time, ties by type.
pub fn sample_arrivals(instance: &Instance, seed: u64) -> ArrivalSample {
    let mut rng = stream_rng(seed, Stream::Arrivals);
    let mut events = Vec::new();
    for (i, ty) in instance.types.iter().enumerate() {
        for piece in &ty.rate.pieces {
            let mass = piece.mass();
            if mass <= 0.0 {
                continue;
            }
            let count = Poisson::new(mass).expect("finite positive mean").sample(&mut rng) as u64;
            let len = piece.len();
            for _ in 0..count {
                let u: f64 = rng.random();
                let time = (piece.start + u * len).min(piece.end);
                events.push(Arrival { time, customer_type: i });
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.customer_type.cmp(&b.customer_type)));
    ArrivalSample { events, seed }
}

/// Everything the policies need, computed once per instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub fluid: FluidSolution,
    pub split: SplitRates,
    pub reward_functions: Arc<Vec<RewardFunction>>,
}

impl Prepared {
    /// Solves the fluid LP and the reward functions; `dt = None` uses the
    /// default step per resource.
    pub fn new(instance: &Instance, dt: Option<f64>) -> Result<Self, HjbError> {
        let fluid = lp::solve_fluid(instance);
        let split = hjb::split_rates(instance, &fluid);
        let reward_functions = Arc::new(hjb::compute_all(instance, &split, dt)?);
        Ok(Prepared { fluid, split, reward_functions })
    }

    pub fn policy(&self, instance: &Instance, kind: PolicyKind) -> Box<dyn Policy> {
        match kind {
            PolicyKind::Separation => {
                Box::new(Separation::new(instance, &self.fluid, self.reward_functions.clone()))
            }
            PolicyKind::Maa => Box::new(MarginalAllocation::new(instance, self.reward_functions.clone())),
            PolicyKind::Greedy => Box::new(Greedy::new(instance)),
            PolicyKind::BidPrice => Box::new(BidPrice::new(instance, &self.fluid)),
        }
    }

    /// `Σ_j f_j(0, C_j)`, the separation policy's expected reward.
    pub fn separation_value(&self) -> f64 {
        self.reward_functions.iter().map(RewardFunction::initial_value).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub customer_type: usize,
    pub decision: Decision,
    pub reward: f64,
}

/// Outcome of running one policy over one arrival sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub reward: f64,
    pub units_used: Vec<u32>,
    pub accepted: u64,
    pub rejected: u64,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Feeds `sample` through `policy`, consuming capacity on every assignment.
pub fn run_on_sample(
    instance: &Instance,
    policy: &dyn Policy,
    sample: &ArrivalSample,
    routing: &mut ChaCha20Rng,
    record_trace: bool,
) -> Replication {
    let mut state = PolicyState::new(instance);
    let mut reward = 0.0;
    let (mut accepted, mut rejected) = (0u64, 0u64);
    let mut trace = record_trace.then(|| Vec::with_capacity(sample.len()));
    for ev in &sample.events {
        state.clock = ev.time;
        let decision = policy.decide(&state, ev.customer_type, ev.time, routing);
        let gained = match decision {
            Decision::Assign(j) => {
                assert!(state.remaining[j] > 0, "{} assigned exhausted resource {j}", policy.kind());
                state.remaining[j] -= 1;
                accepted += 1;
                instance.reward(ev.customer_type, j)
            }
            Decision::Reject => {
                rejected += 1;
                0.0
            }
        };
        reward += gained;
        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry { time: ev.time, customer_type: ev.customer_type, decision, reward: gained });
        }
    }
    let units_used = instance.capacities().iter().zip(&state.remaining).map(|(c, r)| c - r).collect();
    Replication { reward, units_used, accepted, rejected, trace }
}

/// Samples arrivals from `seed` and runs `policy` on them.
pub fn run_replication(instance: &Instance, policy: &dyn Policy, seed: u64, record_trace: bool) -> Replication {
    let sample = sample_arrivals(instance, seed);
    let mut routing = stream_rng(seed, Stream::Routing);
    run_on_sample(instance, policy, &sample, &mut routing, record_trace)
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, std_dev: f64::NAN, std_error: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Summary { n, mean, std_dev, std_error: std_dev / (n as f64).sqrt() }
    }
}

/// Summary of `a[r] - b[r]`, the right error bar for common-random-number comparisons.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Summary {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Summary::of(&d)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub policies: Vec<PolicyKind>,
    pub n_reps: usize,
    pub base_seed: u64,
    /// Also solve the offline LP on every realised demand vector.
    pub offline: bool,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    /// Keep every decision of every replication.
    pub record_traces: bool,
}

impl ExperimentConfig {
    pub fn new(policies: Vec<PolicyKind>, n_reps: usize, base_seed: u64) -> Self {
        ExperimentConfig { policies, n_reps, base_seed, offline: false, jobs: 1, record_traces: false }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub kind: PolicyKind,
    pub rewards: Vec<f64>,
    pub accepted: Vec<u64>,
    pub rejected: Vec<u64>,
    /// Mean units consumed per resource.
    pub mean_units_used: Vec<f64>,
    pub summary: Summary,
    /// `mean / fluid objective`.
    pub ratio_to_fluid: f64,
    /// Standard error of the ratio.
    pub ratio_se: f64,
    /// Per-replication decision traces when requested.
    pub traces: Option<Vec<Vec<TraceEntry>>>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub arrivals: Vec<usize>,
    pub fluid_objective: f64,
    pub policies: Vec<PolicyResult>,
    /// `OPT(δ)` per replication when requested.
    pub offline: Option<Vec<f64>>,
}

impl SimulationResult {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.kind == kind)
    }

    pub fn offline_summary(&self) -> Option<Summary> {
        self.offline.as_deref().map(Summary::of)
    }
}

struct RepOutcome {
    seed: u64,
    arrivals: usize,
    per_policy: Vec<Replication>,
    offline: Option<f64>,
}

/// Runs `config.n_reps` replications of every requested policy on common samples.
pub fn run_experiment(instance: &Instance, prepared: &Prepared, config: &ExperimentConfig) -> SimulationResult {
    assert!(config.n_reps >= 1, "need at least one replication");
    let policies: Vec<Box<dyn Policy>> = config.policies.iter().map(|&k| prepared.policy(instance, k)).collect();
    let one = |r: usize| -> RepOutcome {
        let seed = derive_seed(config.base_seed, r as u64);
        let sample = sample_arrivals(instance, seed);
        let per_policy = policies
            .iter()
            .map(|p| {
                let mut routing = stream_rng(seed, Stream::Routing);
                run_on_sample(instance, p.as_ref(), &sample, &mut routing, config.record_traces)
            })
            .collect();
        let offline = config
            .offline
            .then(|| lp::solve_offline(instance, &sample.counts(instance.n_types())).objective);
        RepOutcome { seed, arrivals: sample.len(), per_policy, offline }
    };

    let outcomes: Vec<RepOutcome> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| (0..config.n_reps).into_par_iter().map(one).collect())
    } else {
        (0..config.n_reps).map(one).collect()
    };

    let fluid_objective = prepared.fluid.objective;
    let n_res = instance.n_resources();
    let policies = config
        .policies
        .iter()
        .enumerate()
        .map(|(p, &kind)| {
            let reps: Vec<&Replication> = outcomes.iter().map(|o| &o.per_policy[p]).collect();
            let traces = config
                .record_traces
                .then(|| reps.iter().map(|r| r.trace.clone().unwrap_or_default()).collect());
            let rewards: Vec<f64> = reps.iter().map(|r| r.reward).collect();
            let mut mean_units_used = vec![0.0; n_res];
            for r in &reps {
                for (m, &u) in mean_units_used.iter_mut().zip(&r.units_used) {
                    *m += u as f64;
                }
            }
            mean_units_used.iter_mut().for_each(|m| *m /= reps.len() as f64);
            let summary = Summary::of(&rewards);
            let (ratio_to_fluid, ratio_se) = if fluid_objective > 0.0 {
                (summary.mean / fluid_objective, summary.std_error / fluid_objective)
            } else {
                (f64::NAN, f64::NAN)
            };
            PolicyResult {
                kind,
                accepted: reps.iter().map(|r| r.accepted).collect(),
                rejected: reps.iter().map(|r| r.rejected).collect(),
                rewards,
                mean_units_used,
                summary,
                ratio_to_fluid,
                ratio_se,
                traces,
            }
        })
        .collect();

    SimulationResult {
        base_seed: config.base_seed,
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        arrivals: outcomes.iter().map(|o| o.arrivals).collect(),
        fluid_objective,
        policies,
        offline: config.offline.then(|| outcomes.iter().map(|o| o.offline.unwrap()).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_random_instance, CustomerType, RandomParams, RateFunction, Resource};

    fn constant_instance(rate: f64) -> Instance {
        Instance::new(
            1.0,
            vec![Resource::new(1)],
            vec![CustomerType::new(RateFunction::constant(1.0, rate), vec![1.0])],
        )
    }

    #[test]
    fn zero_rates_give_empty_sample() {
        let s = sample_arrivals(&constant_instance(0.0), 4);
        assert!(s.is_empty());
        assert_eq!(s.seed, 4);
    }

    #[test]
    fn constant_rate_count_has_poisson_mean() {
        let inst = constant_instance(2.0);
        let reps = 10_000;
        let total: usize = (0..reps).map(|r| sample_arrivals(&inst, derive_seed(1, r)).len()).sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0f64 / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn piecewise_counts_match_each_piece() {
        let inst = Instance::new(
            1.0,
            vec![Resource::new(1)],
            vec![CustomerType::new(RateFunction::from_breakpoints(&[0.0, 0.5, 1.0], &[1.0, 3.0]), vec![1.0])],
        );
        let reps = 10_000u64;
        let (mut first, mut second) = (0usize, 0usize);
        for r in 0..reps {
            let s = sample_arrivals(&inst, derive_seed(2, r));
            assert!(s.is_sorted());
            first += s.events.iter().filter(|e| e.time < 0.5).count();
            second += s.events.iter().filter(|e| e.time >= 0.5).count();
        }
        let n = reps as f64;
        assert!((first as f64 / n - 0.5).abs() <= 3.0 * (0.5 / n).sqrt());
        assert!((second as f64 / n - 1.5).abs() <= 3.0 * (1.5 / n).sqrt());
    }

    #[test]
    fn samples_are_sorted_and_reproducible() {
        let inst = gen_random_instance(&RandomParams::new(3, 4, 2, 2.0), 8);
        let a = sample_arrivals(&inst, 77);
        assert!(a.is_sorted());
        assert!(a.events.iter().all(|e| (0.0..=2.0).contains(&e.time) && e.customer_type < 4));
        assert_eq!(a, sample_arrivals(&inst, 77));
    }

    #[test]
    fn single_arrival_maa_collects_reward() {
        let inst = constant_instance(1.0);
        let prep = Prepared::new(&inst, None).unwrap();
        let maa = prep.policy(&inst, PolicyKind::Maa);
        let sample = ArrivalSample {
            events: vec![Arrival { time: 0.5, customer_type: 0 }],
            seed: 0,
        };
        let out = run_on_sample(&inst, maa.as_ref(), &sample, &mut stream_rng(0, Stream::Routing), true);
        assert_eq!(out.reward, 1.0);
        assert_eq!(out.units_used, vec![1]);
        assert_eq!(out.trace.unwrap().len(), 1);

        let empty = ArrivalSample { events: vec![], seed: 0 };
        let out = run_on_sample(&inst, maa.as_ref(), &empty, &mut stream_rng(0, Stream::Routing), false);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn replication_is_bit_identical() {
        let inst = gen_random_instance(&RandomParams::new(3, 3, 2, 1.0), 1);
        let prep = Prepared::new(&inst, None).unwrap();
        for kind in PolicyKind::ALL {
            let p = prep.policy(&inst, kind);
            let a = run_replication(&inst, p.as_ref(), 99, true);
            let b = run_replication(&inst, p.as_ref(), 99, true);
            assert_eq!(a.reward.to_bits(), b.reward.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_replication_experiment_equals_run_replication() {
        let inst = gen_random_instance(&RandomParams::new(3, 3, 2, 1.0), 2);
        let prep = Prepared::new(&inst, None).unwrap();
        let res = run_experiment(&inst, &prep, &ExperimentConfig::new(PolicyKind::ALL.to_vec(), 1, 5));
        for pr in &res.policies {
            let p = prep.policy(&inst, pr.kind);
            let direct = run_replication(&inst, p.as_ref(), derive_seed(5, 0), false);
            assert_eq!(pr.rewards[0], direct.reward);
            assert_eq!(pr.ratio_to_fluid, pr.summary.mean / prep.fluid.objective);
        }
    }

    #[test]
    fn experiment_is_independent_of_thread_count() {
        let inst = gen_random_instance(&RandomParams::new(4, 3, 2, 1.0), 3);
        let prep = Prepared::new(&inst, None).unwrap();
        let mut cfg = ExperimentConfig::new(PolicyKind::ALL.to_vec(), 64, 11);
        cfg.offline = true;
        let serial = run_experiment(&inst, &prep, &cfg);
        cfg.jobs = 4;
        let parallel = run_experiment(&inst, &prep, &cfg);
        assert_eq!(serial.seeds, parallel.seeds);
        assert_eq!(serial.offline, parallel.offline);
        for (a, b) in serial.policies.iter().zip(&parallel.policies) {
            assert_eq!(a.rewards, b.rewards);
            assert_eq!(a.summary, b.summary);
        }
    }

    #[test]
    fn capacity_is_never_exceeded() {
        for seed in 0..5 {
            let inst = gen_random_instance(&RandomParams::new(4, 5, 1, 1.0), seed);
            let prep = Prepared::new(&inst, None).unwrap();
            let caps = inst.capacities();
            for kind in PolicyKind::ALL {
                let p = prep.policy(&inst, kind);
                for r in 0..50 {
                    let out = run_replication(&inst, p.as_ref(), derive_seed(seed, r), false);
                    assert!(out.units_used.iter().zip(&caps).all(|(u, c)| u <= c));
                    assert!(out.reward >= 0.0);
                    assert_eq!(out.accepted, out.units_used.iter().map(|&u| u as u64).sum::<u64>());
                }
            }
        }
    }

    #[test]
    fn separation_routing_matches_fluid_fractions() {
        let inst = gen_random_instance(&RandomParams::new(3, 2, 2, 1.0), 21);
        let prep = Prepared::new(&inst, None).unwrap();
        let sep = Separation::new(&inst, &prep.fluid, prep.reward_functions.clone());
        let lam = inst.expected_arrivals();
        let reps = 4000u64;
        let n = inst.n_resources();
        for i in 0..inst.n_types() {
            let mut per_rep = vec![Vec::with_capacity(reps as usize); n];
            for r in 0..reps {
                let seed = derive_seed(17, r);
                let sample = sample_arrivals(&inst, seed);
                let mut rng = stream_rng(seed, Stream::Routing);
                let mut counts = vec![0.0; n];
                let mut arrivals = 0.0;
                for ev in &sample.events {
                    let u: f64 = rng.random();
                    if ev.customer_type != i {
                        continue;
                    }
                    arrivals += 1.0;
                    if let Some(j) = sep.route(i, u) {
                        counts[j] += 1.0;
                    }
                }
                for j in 0..n {
                    // routed count minus its thinning expectation given the arrivals
                    per_rep[j].push(counts[j] - arrivals * prep.fluid.x[i][j] / lam[i]);
                }
            }
            for j in 0..n {
                let s = Summary::of(&per_rep[j]);
                assert!(s.mean.abs() <= 3.0 * s.std_error + 1e-12, "type {i} resource {j}: {s:?}");
            }
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.std_error - s.std_dev / 2.0).abs() < 1e-15);
        let d = paired_difference(&[2.0, 3.0], &[1.0, 1.0]);
        assert_eq!(d.mean, 1.5);
    }
}
