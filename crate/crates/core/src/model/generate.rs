//! Synthetic instance generators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{CustomerType, Instance, ModelError, RateFunction, Resource};

/// Parameters for [`gen_random_instance`].
#[derive(Debug, Clone)]
pub struct RandomParams {
    pub n_resources: usize,
    pub m_types: usize,
    /// Every capacity is drawn from `[min_capacity, 2 * min_capacity]`.
    pub min_capacity: u32,
    pub horizon: f64,
    /// Total expected arrivals divided by total capacity is drawn uniformly
    /// from this range.
    pub load_range: (f64, f64),
}

impl RandomParams {
    pub fn new(n_resources: usize, m_types: usize, min_capacity: u32, horizon: f64) -> Self {
        RandomParams { n_resources, m_types, min_capacity, horizon, load_range: (0.5, 1.5) }
    }
}

/// Random instance with 2–6 rate pieces per type, rewards uniform on `[0, 1]`
/// and every capacity at least `min_capacity`. Deterministic in `seed`.
pub fn gen_random_instance(params: &RandomParams, seed: u64) -> Instance {
    assert!(params.n_resources >= 1 && params.m_types >= 1 && params.min_capacity >= 1);
    assert!(params.horizon > 0.0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = params.min_capacity;
    let horizon = params.horizon;

    let resources: Vec<Resource> =
        (0..params.n_resources).map(|_| Resource::new(rng.random_range(k..=2 * k))).collect();

    let mut rates = Vec::with_capacity(params.m_types);
    for _ in 0..params.m_types {
        let n_pieces = rng.random_range(2..=6usize);
        let mut cuts: Vec<f64> = (0..n_pieces - 1).map(|_| rng.random::<f64>() * horizon).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut breaks = Vec::with_capacity(cuts.len() + 2);
        breaks.push(0.0);
        breaks.extend(cuts.into_iter().filter(|&c| c > 0.0 && c < horizon));
        breaks.push(horizon);
        let levels: Vec<f64> = (0..breaks.len() - 1).map(|_| rng.random_range(0.1..1.0)).collect();
        rates.push(RateFunction::from_breakpoints(&breaks, &levels));
    }
    let total_capacity: f64 = resources.iter().map(|r| r.capacity as f64).sum();
    let (lo, hi) = params.load_range;
    let load = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let raw: f64 = rates.iter().map(RateFunction::integral).sum();
    let scale = load * total_capacity / raw;

    let types = rates
        .into_iter()
        .map(|rate| {
            let rewards = (0..params.n_resources).map(|_| rng.random::<f64>()).collect();
            CustomerType::new(rate.scaled(scale), rewards)
        })
        .collect();
    Instance::new(horizon, resources, types)
}

/// Relative weekly arrival profile, Monday first. Friday carries twice the
/// weekday volume and nobody books at weekends.
const WEEKDAY_WEIGHTS: [f64; 7] = [1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 0.0];

/// Parameters for [`gen_clinic_instance`].
///
/// Time is measured in days. Sessions `0, 1` are the morning and afternoon of
/// Monday, `2, 3` of Tuesday and so on; a session expires at the end of its day.
#[derive(Debug, Clone)]
pub struct ClinicParams {
    pub weeks: u32,
    pub sessions_per_week: u32,
    pub capacity: u32,
    /// Probability that a patient is available for any given weekly session.
    pub availability: f64,
    /// Show probability by days of wait; waits between keys use the largest
    /// key not exceeding the wait.
    pub reward_table: BTreeMap<u32, f64>,
    /// Expected weekly arrivals as a multiple of weekly capacity.
    pub load: f64,
}

impl ClinicParams {
    pub fn new(
        weeks: u32,
        sessions_per_week: u32,
        capacity: u32,
        availability: f64,
        reward_table: BTreeMap<u32, f64>,
    ) -> Self {
        ClinicParams { weeks, sessions_per_week, capacity, availability, reward_table, load: 1.0 }
    }

    fn check(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Parameter(m));
        if self.weeks < 1 {
            return bad("weeks must be >= 1".into());
        }
        if !(1..=14).contains(&self.sessions_per_week) {
            return bad(format!("sessions_per_week must be in 1..=14, got {}", self.sessions_per_week));
        }
        if self.capacity < 1 {
            return bad("capacity must be >= 1".into());
        }
        if !(self.availability > 0.0 && self.availability <= 1.0) {
            return bad(format!("availability probability must be in (0, 1], got {}", self.availability));
        }
        if self.reward_table.is_empty() {
            return bad("reward table is empty".into());
        }
        if let Some((k, v)) = self.reward_table.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return bad(format!("show probability {v} for wait {k} outside [0, 1]"));
        }
        if !(self.load.is_finite() && self.load > 0.0) {
            return bad(format!("load must be > 0, got {}", self.load));
        }
        Ok(())
    }

    fn show_probability(&self, wait_days: u32) -> f64 {
        self.reward_table
            .range(..=wait_days)
            .next_back()
            .or_else(|| self.reward_table.iter().next())
            .map(|(_, &v)| v)
            .unwrap_or(0.0)
    }
}

/// Clinic-style instance: one resource per session and one customer type per
/// (arrival day, availability mask). With `availability = 1` only the
/// all-available mask has positive probability, giving one type per arrival
/// day; otherwise every one of the `2^sessions_per_week` masks is a type.
///
/// `seed` jitters each day's arrival rate by a factor drawn from `[0.8, 1.2]`.
pub fn gen_clinic_instance(params: &ClinicParams, seed: u64) -> Result<Instance, ModelError> {
    params.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let days = params.weeks * 7;
    let horizon = days as f64;
    let spw = params.sessions_per_week;

    let mut resources = Vec::new();
    let mut session_day = Vec::new();
    let mut session_slot = Vec::new();
    for w in 0..params.weeks {
        for s in 0..spw {
            let day = w * 7 + s / 2;
            resources.push(Resource::with_expiry(params.capacity, (day + 1) as f64));
            session_day.push(day);
            session_slot.push(s);
        }
    }

    let weekly_arrivals = params.load * (spw * params.capacity) as f64;
    let weight_sum: f64 = WEEKDAY_WEIGHTS.iter().sum();
    let daily_rates: Vec<f64> = (0..days)
        .map(|d| {
            let jitter = rng.random_range(0.8..1.2);
            weekly_arrivals * WEEKDAY_WEIGHTS[(d % 7) as usize] / weight_sum * jitter
        })
        .collect();

    let masks: Vec<(u32, f64)> = (0..1u32 << spw)
        .map(|mask| {
            let on = mask.count_ones() as i32;
            let p = params.availability.powi(on) * (1.0 - params.availability).powi(spw as i32 - on);
            (mask, p)
        })
        .filter(|&(_, p)| p > 0.0)
        .collect();

    let mut types = Vec::new();
    for (d, &day_rate) in daily_rates.iter().enumerate() {
        if day_rate <= 0.0 {
            continue;
        }
        let d = d as u32;
        for &(mask, p) in &masks {
            let mut breaks = Vec::with_capacity(4);
            let mut levels = Vec::with_capacity(3);
            breaks.push(0.0);
            if d > 0 {
                breaks.push(d as f64);
                levels.push(0.0);
            }
            breaks.push((d + 1) as f64);
            levels.push(day_rate * p);
            if d + 1 < days {
                breaks.push(horizon);
                levels.push(0.0);
            }
            let rewards = (0..resources.len())
                .map(|j| {
                    let open = mask & (1 << session_slot[j]) != 0;
                    if open && session_day[j] >= d {
                        params.show_probability(session_day[j] - d)
                    } else {
                        0.0
                    }
                })
                .collect();
            types.push(CustomerType::new(RateFunction::from_breakpoints(&breaks, &levels), rewards));
        }
    }
    Ok(Instance::new(horizon, resources, types))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> BTreeMap<u32, f64> {
        [(0, 0.95), (1, 0.8), (3, 0.7), (7, 0.6), (14, 0.45)].into_iter().collect()
    }

    #[test]
    fn random_instance_respects_min_capacity_and_is_valid() {
        for seed in 0..20 {
            let inst = gen_random_instance(&RandomParams::new(5, 4, 5, 3.0), seed);
            assert!(inst.min_capacity() >= 5);
            assert!(inst.validate().is_empty());
            for t in &inst.types {
                assert!(t.rate.pieces.len() >= 2, "needs at least two pieces");
                assert!(t.rewards.iter().all(|r| (0.0..=1.0).contains(r)));
            }
        }
    }

    #[test]
    fn random_instance_is_deterministic() {
        let p = RandomParams::new(3, 3, 2, 1.0);
        assert_eq!(gen_random_instance(&p, 7), gen_random_instance(&p, 7));
        assert_ne!(gen_random_instance(&p, 7), gen_random_instance(&p, 8));
    }

    #[test]
    fn full_availability_gives_one_type_per_arrival_day() {
        let p = ClinicParams::new(2, 8, 3, 1.0, table());
        let inst = gen_clinic_instance(&p, 1).unwrap();
        // Monday to Friday carry arrivals.
        assert_eq!(inst.n_types(), 2 * 5);
        assert_eq!(inst.n_resources(), 16);
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn eight_sessions_give_two_hundred_fifty_six_masks_per_day() {
        let p = ClinicParams::new(1, 8, 2, 0.5, table());
        let inst = gen_clinic_instance(&p, 3).unwrap();
        assert_eq!(inst.n_types(), 5 * 256);
        assert!(inst.validate().is_empty());
        // Mask probabilities partition each day's arrivals.
        let per_day: f64 = inst.types[..256].iter().map(|t| t.expected_arrivals()).sum();
        let monday = inst.types[255].rate.pieces[0].rate / 0.5f64.powi(8);
        assert!((per_day - monday).abs() < 1e-9 * monday);
    }

    #[test]
    fn rewards_follow_mask_and_wait() {
        let p = ClinicParams::new(1, 4, 1, 1.0, table());
        let inst = gen_clinic_instance(&p, 0).unwrap();
        // Tuesday arrivals (type 1): Monday sessions are in the past.
        let tue = &inst.types[1].rewards;
        assert_eq!(tue[0], 0.0);
        assert_eq!(tue[1], 0.0);
        assert_eq!(tue[2], 0.95);
        assert_eq!(tue[3], 0.95);
        // Monday arrivals wait one day for Tuesday.
        assert_eq!(inst.types[0].rewards[2], 0.8);
    }

    #[test]
    fn clinic_is_deterministic_and_rejects_bad_availability() {
        let p = ClinicParams::new(2, 4, 2, 0.7, table());
        assert_eq!(gen_clinic_instance(&p, 9).unwrap(), gen_clinic_instance(&p, 9).unwrap());
        let mut bad = p.clone();
        bad.availability = 0.0;
        assert!(matches!(gen_clinic_instance(&bad, 9), Err(ModelError::Parameter(_))));
        bad.availability = -0.3;
        assert!(gen_clinic_instance(&bad, 9).is_err());
    }

    #[test]
    fn table_lookup_uses_largest_key_below() {
        let p = ClinicParams::new(1, 2, 1, 1.0, table());
        assert_eq!(p.show_probability(2), 0.8);
        assert_eq!(p.show_probability(10), 0.6);
        assert_eq!(p.show_probability(100), 0.45);
    }
}
