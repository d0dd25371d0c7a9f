use advsched::bounds::{
    asymptotic_bound, closed_form_bound, default_step, solve_beta_star, worst_case_ratio, BETA_TOL,
};
use advsched::RateFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_profile(k: usize, rng: &mut ChaCha20Rng) -> RateFunction {
    let horizon = k as f64;
    let breaks: Vec<f64> = (0..=10).map(|i| horizon * i as f64 / 10.0).collect();
    let levels: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
    let mass: f64 = levels.iter().sum::<f64>() * horizon / 10.0;
    let levels: Vec<f64> = levels.iter().map(|l| l / mass).collect();
    RateFunction::from_breakpoints(&breaks, &levels)
}

#[test]
fn random_profiles_never_beat_the_bound() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for k in [1usize, 2, 5] {
        let beta = solve_beta_star(k, default_step(k), BETA_TOL).unwrap().beta_star;
        for _ in 0..100 {
            let r = random_profile(k, &mut rng);
            let ratio = worst_case_ratio(&r, k, default_step(k)).unwrap();
            assert!(ratio >= beta - 1e-3, "k={k}: ratio {ratio} below beta* {beta}");
        }
    }
}

#[test]
fn late_mass_approaches_one() {
    let k = 2;
    let beta = solve_beta_star(k, default_step(k), BETA_TOL).unwrap().beta_star;
    let mut prev = 0.0;
    for eps in [0.5, 0.2, 0.05, 0.01] {
        let r = RateFunction::from_breakpoints(&[0.0, 2.0 - eps, 2.0], &[0.0, 1.0 / eps]);
        let ratio = worst_case_ratio(&r, k, 1e-4).unwrap();
        assert!(ratio >= beta - 1e-3);
        assert!(ratio > prev, "eps {eps}: {ratio} <= {prev}");
        prev = ratio;
    }
    assert!(prev > 0.99);
}

#[test]
fn halving_the_step_moves_beta_little() {
    for k in [1usize, 3, 8] {
        let h = default_step(k);
        let coarse = solve_beta_star(k, h, BETA_TOL).unwrap().beta_star;
        let fine = solve_beta_star(k, h / 2.0, BETA_TOL).unwrap().beta_star;
        assert!((coarse - fine).abs() < 1e-5, "k={k}: {coarse} vs {fine}");
    }
}

#[test]
fn bound_chain_is_ordered() {
    for k in 1..=20usize {
        let beta = solve_beta_star(k, default_step(k), BETA_TOL).unwrap().beta_star;
        let (a, c) = (asymptotic_bound(k), closed_form_bound(k));
        assert!(a <= c + 1e-9 && c <= beta + 1e-9, "k={k}: {a} {c} {beta}");
    }
}
