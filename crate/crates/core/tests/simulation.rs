use advsched::model::{gen_random_instance, RandomParams};
use advsched::sim::{derive_seed, run_experiment, sample_arrivals, ExperimentConfig, Prepared};
use advsched::{CustomerType, Instance, PolicyKind, RateFunction, Resource};

#[test]
fn sampled_counts_match_rate_integrals() {
    let inst = Instance::new(
        2.0,
        vec![Resource::new(1)],
        vec![
            CustomerType::new(RateFunction::from_breakpoints(&[0.0, 1.0, 2.0], &[3.0, 0.5]), vec![1.0]),
            CustomerType::new(RateFunction::constant(2.0, 1.25), vec![1.0]),
        ],
    );
    let reps = 20_000u64;
    let mut totals = [0.0f64; 2];
    for r in 0..reps {
        let s = sample_arrivals(&inst, derive_seed(5, r));
        assert!(s.is_sorted());
        for (t, c) in totals.iter_mut().zip(s.counts(2)) {
            *t += c as f64;
        }
    }
    for (i, want) in [3.5, 2.5].into_iter().enumerate() {
        let mean = totals[i] / reps as f64;
        let se = (want / reps as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "type {i}: {mean} vs {want}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let inst = gen_random_instance(&RandomParams::new(3, 5, 2, 1.0), 42);
    let prep = Prepared::new(&inst, None).unwrap();
    let mut cfg = ExperimentConfig::new(PolicyKind::ALL.to_vec(), 64, 9);
    cfg.jobs = 1;
    let one = run_experiment(&inst, &prep, &cfg);
    cfg.jobs = 4;
    let four = run_experiment(&inst, &prep, &cfg);
    for (a, b) in one.policies.iter().zip(&four.policies) {
        assert_eq!(a.rewards, b.rewards);
    }
    cfg.base_seed = 10;
    let other = run_experiment(&inst, &prep, &cfg);
    assert_ne!(one.policies[0].rewards, other.policies[0].rewards);
}

#[test]
fn policies_see_the_same_arrivals() {
    let inst = gen_random_instance(&RandomParams::new(2, 3, 1, 1.0), 3);
    let prep = Prepared::new(&inst, None).unwrap();
    let mut cfg = ExperimentConfig::new(PolicyKind::ALL.to_vec(), 30, 1);
    cfg.record_traces = true;
    let res = run_experiment(&inst, &prep, &cfg);
    let arrivals = |p: usize| -> Vec<Vec<usize>> {
        res.policies[p].traces.as_ref().unwrap().iter().map(|t| t.iter().map(|e| e.customer_type).collect()).collect()
    };
    for p in 1..res.policies.len() {
        assert_eq!(arrivals(0), arrivals(p));
    }
}
