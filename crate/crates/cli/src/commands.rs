use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use advsched::bounds::{self, BoundResult};
use advsched::hjb::{MONOTONE_TOL, STABILITY_LIMIT};
use advsched::lp::{self, solve_fluid, solve_offline};
use advsched::model::{self, gen_clinic_instance, gen_random_instance, ClinicParams, Instance, RandomParams};
use advsched::overbook::{expand_instance, OverbookSpec, OverbookedInstance, SlotOrigin};
use advsched::sim::{derive_seed, run_experiment, sample_arrivals, ExperimentConfig, Prepared, Summary};
use advsched::PolicyKind;

use crate::manifest::RunManifest;
use crate::output::{g9, join_g9, write_file, Csv};
use crate::{BoundArgs, ClinicArgs, OfflineArgs, OverbookArgs, PolicyChoice, RandomArgs, SimulateArgs};

pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

pub type RewardTable = BTreeMap<u32, f64>;

/// Parses `"0:0.95,7:0.8"` into a wait-days → show-probability table.
pub fn parse_reward_table(s: &str) -> std::result::Result<RewardTable, String> {
    let mut table = BTreeMap::new();
    for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (days, prob) = entry.split_once(':').ok_or_else(|| format!("entry `{entry}` is not `days:probability`"))?;
        let days: u32 = days.trim().parse().map_err(|_| format!("bad wait `{days}` in `{entry}`"))?;
        let prob: f64 = prob.trim().parse().map_err(|_| format!("bad probability `{prob}` in `{entry}`"))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(format!("probability {prob} for wait {days} outside [0, 1]"));
        }
        if table.insert(days, prob).is_some() {
            return Err(format!("wait {days} listed twice"));
        }
    }
    if table.is_empty() {
        return Err("reward table is empty".into());
    }
    Ok(table)
}

fn load(path: &Path) -> Result<Instance> {
    model::load_instance(path).with_context(|| format!("loading instance {}", path.display())).map_err(Failure::Data)
}

fn save(instance: &Instance, path: &Path) -> Result<()> {
    model::save_instance(instance, path)?;
    Ok(())
}

fn describe(instance: &Instance) -> String {
    format!(
        "{} resources (total capacity {}), {} types, horizon {}, expected arrivals {}",
        instance.n_resources(),
        instance.capacities().iter().map(|&c| c as u64).sum::<u64>(),
        instance.n_types(),
        g9(instance.horizon),
        g9(instance.expected_arrivals().iter().sum()),
    )
}

pub fn gen_random(a: RandomArgs) -> Result<()> {
    if !(a.horizon.is_finite() && a.horizon > 0.0) {
        return usage(format!("--horizon must be > 0, got {}", a.horizon));
    }
    let params = RandomParams::new(a.resources as usize, a.types as usize, a.min_capacity, a.horizon);
    let instance = gen_random_instance(&params, a.seed);
    save(&instance, &a.out)?;
    let mut m = RunManifest::new("gen random");
    m.seeds.push(a.seed);
    m.param("resources", a.resources)
        .param("types", a.types)
        .param("min_capacity", a.min_capacity)
        .param("horizon", a.horizon);
    m.finish(&[&a.out])?;
    println!("wrote {}: {}", a.out.display(), describe(&instance));
    Ok(())
}

pub fn gen_clinic(a: ClinicArgs) -> Result<()> {
    if !(a.availability > 0.0 && a.availability <= 1.0) {
        return usage(format!("--availability must be in (0, 1], got {}", a.availability));
    }
    if !(a.load.is_finite() && a.load > 0.0) {
        return usage(format!("--load must be > 0, got {}", a.load));
    }
    let mut params = ClinicParams::new(a.weeks, a.sessions_per_week, a.capacity, a.availability, a.reward_table.clone());
    params.load = a.load;
    let instance = gen_clinic_instance(&params, a.seed)?;
    save(&instance, &a.out)?;
    let mut m = RunManifest::new("gen clinic");
    m.seeds.push(a.seed);
    m.param("weeks", a.weeks)
        .param("sessions_per_week", a.sessions_per_week)
        .param("capacity", a.capacity)
        .param("availability", a.availability)
        .param("load", a.load)
        .param(
            "reward_table",
            a.reward_table.iter().map(|(d, p)| format!("{d}:{p}")).collect::<Vec<_>>().join(","),
        );
    m.finish(&[&a.out])?;
    println!("wrote {}: {}", a.out.display(), describe(&instance));
    Ok(())
}

/// Side file of an overbooked instance mapping slots back to resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotMap {
    pub version: u64,
    pub no_show: Vec<f64>,
    pub denial_cost: Vec<f64>,
    pub max_virtual: Vec<u32>,
    pub slots: Vec<SlotOrigin>,
    /// `costs[j][k-1]`: expected cost of the `k`-th overbooked unit of resource `j`.
    pub costs: Vec<Vec<f64>>,
    pub original_rewards: Vec<Vec<f64>>,
}

pub fn slot_map_path(out: &Path) -> PathBuf {
    out.with_extension("slots.json")
}

fn load_slot_map(path: &Path, instance: &Instance) -> Result<OverbookedInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let map: SlotMap = serde_json::from_str(&text).with_context(|| format!("parsing slot map {}", path.display()))?;
    if map.slots.len() != instance.n_resources() || map.original_rewards.len() != instance.n_types() {
        return Err(Failure::Data(anyhow!(
            "slot map {} describes {} slots and {} types, instance has {} resources and {} types",
            path.display(),
            map.slots.len(),
            map.original_rewards.len(),
            instance.n_resources(),
            instance.n_types()
        )));
    }
    Ok(OverbookedInstance {
        instance: instance.clone(),
        slots: map.slots,
        costs: map.costs,
        original_rewards: map.original_rewards,
    })
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    if let Some(dt) = a.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return usage(format!("--dt must be > 0, got {dt}"));
        }
    }
    let instance = load(&a.instance)?;
    let kinds: Vec<PolicyKind> = match a.policy {
        PolicyChoice::All => PolicyKind::ALL.to_vec(),
        PolicyChoice::Separation => vec![PolicyKind::Separation],
        PolicyChoice::Maa => vec![PolicyKind::Maa],
        PolicyChoice::Greedy => vec![PolicyKind::Greedy],
        PolicyChoice::Bidprice => vec![PolicyKind::BidPrice],
    };
    let overbooked = a.slots.as_deref().map(|p| load_slot_map(p, &instance)).transpose()?;
    let prepared = Prepared::new(&instance, a.dt)?;

    let mut config = ExperimentConfig::new(kinds, a.reps as usize, a.seed);
    config.offline = a.offline;
    config.jobs = a.jobs as usize;
    config.record_traces = overbooked.is_some();
    let result = run_experiment(&instance, &prepared, &config);

    let mut header = vec!["policy", "replication", "seed", "arrivals", "reward", "accepted", "rejected"];
    if a.offline {
        header.push("offline_opt");
    }
    if overbooked.is_some() {
        header.extend(["gross", "overbooking_cost", "net", "virtual_used", "in_fill_order"]);
    }
    let mut csv = Csv::default();
    csv.row(header);
    let mut net_by_policy = Vec::new();
    for p in &result.policies {
        let accounts: Option<Vec<_>> = overbooked
            .as_ref()
            .map(|ob| p.traces.as_ref().expect("traces recorded").iter().map(|t| ob.account(t)).collect());
        for r in 0..result.seeds.len() {
            let mut row = vec![
                p.kind.to_string(),
                r.to_string(),
                result.seeds[r].to_string(),
                result.arrivals[r].to_string(),
                g9(p.rewards[r]),
                p.accepted[r].to_string(),
                p.rejected[r].to_string(),
            ];
            if let Some(off) = &result.offline {
                row.push(g9(off[r]));
            }
            if let Some(acc) = &accounts {
                let n = &acc[r];
                row.extend([
                    g9(n.gross),
                    g9(n.overbooking_cost),
                    g9(n.net),
                    n.virtual_used.iter().sum::<u32>().to_string(),
                    n.in_fill_order.to_string(),
                ]);
            }
            csv.row(row);
        }
        if let Some(acc) = accounts {
            let nets: Vec<f64> = acc.iter().map(|n| n.net).collect();
            net_by_policy.push((format!("{}:net", p.kind), Summary::of(&nets)));
        }
    }

    let fluid = result.fluid_objective;
    let ratio = |x: f64| if fluid > 0.0 { x / fluid } else { f64::NAN };
    let mut summary = Csv::default();
    summary.row(["policy", "n", "mean", "std_dev", "std_error", "ratio_to_fluid", "ratio_se"]);
    let mut summary_row = |name: &str, s: &Summary| {
        summary.row([
            name.to_string(),
            s.n.to_string(),
            g9(s.mean),
            g9(s.std_dev),
            g9(s.std_error),
            g9(ratio(s.mean)),
            g9(ratio(s.std_error)),
        ]);
    };
    for p in &result.policies {
        summary_row(p.kind.as_str(), &p.summary);
    }
    for (name, s) in &net_by_policy {
        summary_row(name, s);
    }
    if let Some(s) = result.offline_summary() {
        summary_row("offline_opt", &s);
    }
    let exact = |x: f64| Summary { n: 0, mean: x, std_dev: 0.0, std_error: 0.0 };
    summary_row("fluid_ub", &exact(fluid));
    summary_row("hjb_separation_value", &exact(prepared.separation_value()));

    print!("{}", summary.as_str());
    let concavity = prepared.reward_functions.iter().map(|f| f.max_concavity_violation()).fold(0.0, f64::max);
    if concavity > MONOTONE_TOL {
        eprintln!("note: reward functions are not concave in capacity (largest marginal increase {})", g9(concavity));
    }

    let mut outputs: Vec<PathBuf> = Vec::new();
    if let Some(out) = &a.out {
        let mut text = csv.as_str().to_string();
        text.push('\n');
        text.push_str(summary.as_str());
        write_file(out, text.as_bytes())?;
        outputs.push(out.clone());
    }
    if let Some(dump) = &a.dump_hjb {
        let mut text = String::from("resource,t,c,f\n");
        for f in prepared.reward_functions.iter() {
            for (n, &t) in f.times().iter().enumerate() {
                for (c, v) in f.row(n).iter().enumerate() {
                    let _ = writeln!(text, "{},{},{},{}", f.resource, g9(t), c, g9(*v));
                }
            }
        }
        write_file(dump, text.as_bytes())?;
        outputs.push(dump.clone());
    }
    if !outputs.is_empty() {
        let mut m = RunManifest::new("simulate");
        m.seeds.push(a.seed);
        m.input(&a.instance)?;
        if let Some(s) = &a.slots {
            m.input(s)?;
        }
        for f in prepared.reward_functions.iter() {
            m.grid_steps.insert(format!("hjb_dt[{}]", f.resource), f.dt);
        }
        m.tolerances.insert("lp".into(), lp::TOL);
        m.tolerances.insert("hjb_stability".into(), STABILITY_LIMIT);
        m.tolerances.insert("hjb_monotone".into(), MONOTONE_TOL);
        m.param("policies", config.policies.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","))
            .param("reps", a.reps)
            .param("offline", a.offline)
            .param("jobs", a.jobs);
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        m.finish(&refs)?;
    }
    Ok(())
}

struct BoundRow {
    result: BoundResult,
    closed_form: f64,
    asymptotic: f64,
    dual: f64,
    lemma: f64,
    eq9: f64,
}

fn bound_row(k: usize, h: f64, tol: f64) -> std::result::Result<BoundRow, bounds::BoundsError> {
    let result = bounds::solve_beta_star(k, h, tol)?;
    let dual = bounds::verify_dual_feasibility(&result, &result.process()).max_residual();
    let lemma = bounds::lemma_identity_check(&result);
    Ok(BoundRow {
        closed_form: bounds::closed_form_bound(k),
        asymptotic: bounds::asymptotic_bound(k),
        dual,
        lemma: lemma.lemma,
        eq9: lemma.eq9,
        result,
    })
}

pub const BOUND_HEADER: [&str; 12] = [
    "k",
    "h",
    "beta_star",
    "closed_form",
    "asymptotic",
    "max_dual_residual",
    "lemma_residual",
    "eq9_residual",
    "max_barrier_excess",
    "mass_error",
    "iterations",
    "barriers",
];

pub fn bound(a: BoundArgs) -> Result<()> {
    let kmax = a.kmax.unwrap_or(a.k);
    if kmax < a.k {
        return usage(format!("--kmax {kmax} is below --k {}", a.k));
    }
    if let Some(h) = a.h {
        if !(h > 0.0 && h <= 1e-3) {
            return usage(format!("--h must be in (0, 1e-3], got {h}"));
        }
    }
    if !(a.tol > 0.0 && a.tol < 0.1) {
        return usage(format!("--tol must be in (0, 0.1), got {}", a.tol));
    }
    let ks: Vec<usize> = (a.k as usize..=kmax as usize).collect();
    let step = |k: usize| a.h.unwrap_or_else(|| bounds::default_step(k));
    let rows: Vec<BoundRow> = ks
        .par_iter()
        .map(|&k| bound_row(k, step(k), a.tol))
        .collect::<std::result::Result<_, _>>()?;

    let mut csv = Csv::default();
    csv.row(BOUND_HEADER);
    for r in &rows {
        let b = &r.result;
        csv.row([
            b.k.to_string(),
            g9(b.h),
            g9(b.beta_star),
            g9(r.closed_form),
            g9(r.asymptotic),
            g9(r.dual),
            g9(r.lemma),
            g9(r.eq9),
            g9(if b.barriers.is_empty() { 0.0 } else { b.barrier_excess() }),
            g9(b.max_mass_error),
            b.iterations.to_string(),
            join_g9(&b.barriers, ";"),
        ]);
    }
    print!("{}", csv.as_str());
    if let Some(out) = &a.out {
        write_file(out, csv.as_str().as_bytes())?;
        let mut m = RunManifest::new("bound");
        for &k in &ks {
            m.grid_steps.insert(format!("h[k={k}]"), step(k));
        }
        m.tolerances.insert("beta_bisection".into(), a.tol);
        m.param("k", a.k).param("kmax", kmax);
        m.finish(&[out])?;
    }
    Ok(())
}

pub fn overbook(a: OverbookArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.p) {
        return usage(format!("--p must be in [0, 1), got {}", a.p));
    }
    if !(a.d.is_finite() && a.d >= 0.0) {
        return usage(format!("--d must be >= 0, got {}", a.d));
    }
    let instance = load(&a.instance)?;
    let spec = OverbookSpec::uniform(instance.n_resources(), a.p, a.d, a.kmax);
    let ob = expand_instance(&instance, &spec)?;
    save(&ob.instance, &a.out)?;
    let map = SlotMap {
        version: model::SCHEMA_VERSION,
        no_show: spec.no_show.clone(),
        denial_cost: spec.denial_cost.clone(),
        max_virtual: spec.max_virtual.clone(),
        slots: ob.slots.clone(),
        costs: ob.costs.clone(),
        original_rewards: ob.original_rewards.clone(),
    };
    let side = slot_map_path(&a.out);
    write_file(&side, (serde_json::to_string_pretty(&map).map_err(anyhow::Error::from)? + "\n").as_bytes())?;
    let mut m = RunManifest::new("overbook");
    m.input(&a.instance)?;
    m.param("p", a.p).param("d", a.d).param("kmax", a.kmax);
    m.finish(&[&a.out, &side])?;
    println!("wrote {} and {}: {}", a.out.display(), side.display(), describe(&ob.instance));
    let mut costs = Csv::default();
    costs.row(["resource", "k", "cost", "cumulative"]);
    for (j, c) in ob.costs.iter().enumerate() {
        for k in 1..=c.len() {
            costs.row([j.to_string(), k.to_string(), g9(c[k - 1]), g9(ob.cumulative_cost(j, k as u32))]);
        }
    }
    print!("{}", costs.as_str());
    Ok(())
}

pub fn offline_opt(a: OfflineArgs) -> Result<()> {
    let instance = load(&a.instance)?;
    let fluid = solve_fluid(&instance).objective;
    let mut csv = Csv::default();
    csv.row(["replication", "seed", "offline_opt", "integrality_gap", "delta"]);
    let mut values = Vec::new();
    let mut m = RunManifest::new("offline-opt");
    match &a.delta {
        Some(delta) => {
            if delta.len() != instance.n_types() {
                return usage(format!("--delta has {} entries, instance has {} types", delta.len(), instance.n_types()));
            }
            let sol = solve_offline(&instance, delta);
            csv.row([
                "0".into(),
                "none".into(),
                g9(sol.objective),
                g9(sol.integrality_gap()),
                delta.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            ]);
            values.push(sol.objective);
            m.param("delta", delta.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        }
        None => {
            for r in 0..a.reps {
                let seed = derive_seed(a.seed, r);
                let counts = sample_arrivals(&instance, seed).counts(instance.n_types());
                let sol = solve_offline(&instance, &counts);
                csv.row([
                    r.to_string(),
                    seed.to_string(),
                    g9(sol.objective),
                    g9(sol.integrality_gap()),
                    counts.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                ]);
                values.push(sol.objective);
            }
            m.seeds.push(a.seed);
            m.param("reps", a.reps);
        }
    }
    let s = Summary::of(&values);
    let mut summary = Csv::default();
    summary.row(["n", "mean", "std_dev", "std_error", "fluid_ub"]);
    summary.row([s.n.to_string(), g9(s.mean), g9(s.std_dev), g9(s.std_error), g9(fluid)]);
    print!("{}", summary.as_str());
    if let Some(out) = &a.out {
        let text = format!("{}\n{}", csv.as_str(), summary.as_str());
        write_file(out, text.as_bytes())?;
        m.input(&a.instance)?;
        m.tolerances.insert("lp".into(), lp::TOL);
        m.finish(&[out])?;
    }
    Ok(())
}
