//! Poisson probability helpers evaluated in log space.

use statrs::function::gamma::ln_gamma;

/// `ln P(N = i)` for `N ~ Poisson(mean)`.
pub fn ln_pmf(i: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if i == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + (i as f64) * mean.ln() - ln_gamma(i as f64 + 1.0)
}

pub fn pmf(i: u64, mean: f64) -> f64 {
    ln_pmf(i, mean).exp()
}

/// `P(N >= i)`, summed upward from `i` (or taken as a complement below the mode)
/// until the remaining tail mass drops under `1e-16`.
pub fn tail(i: u64, mean: f64) -> f64 {
    if i == 0 {
        return 1.0;
    }
    if (i as f64) < mean {
        let below: f64 = (0..i).map(|l| pmf(l, mean)).sum();
        return (1.0 - below).max(0.0);
    }
    sum_upward(i, mean, |_| 1.0)
}

/// `sum_{l >= from} weight(l) * P(N = l)` for weights growing at most
/// polynomially; truncated once past the mode and terms fall below `1e-18`.
pub fn sum_upward(from: u64, mean: f64, weight: impl Fn(u64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut l = from;
    loop {
        let term = weight(l) * pmf(l, mean);
        total += term;
        if (l as f64) > mean && term < 1e-18 * total.max(1e-300) {
            break;
        }
        if (l as f64) > mean + 50.0 + 40.0 * mean.sqrt() && term == 0.0 {
            break;
        }
        l += 1;
    }
    total
}

/// `E[min(N, cap)]` for `N ~ Poisson(mean)`.
pub fn expected_min(mean: f64, cap: u64) -> f64 {
    // E[min(N,C)] = sum_{l=1}^{C} P(N >= l)
    (1..=cap).map(|l| tail(l, mean)).sum()
}
