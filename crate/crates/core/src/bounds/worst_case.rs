use super::BoundsError;
use crate::model::RateFunction;

/// Normalised separation reward `u_0(0)` of one capacity-`k` resource facing
/// unit-rate arrivals on `[0, k]` with reward rate `r(t)`, `∫ r = 1`.
///
/// Solves `u_l' = -(r - u_l + u_{l+1})⁺` backwards from `u_l(k) = 0`, `u_k ≡ 0`,
/// with RK4 steps of at most `h` aligned to the pieces of `r`.
pub fn worst_case_ratio(r: &RateFunction, k: usize, h: f64) -> Result<f64, BoundsError> {
    if k == 0 {
        return Err(BoundsError::BadCapacity);
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(BoundsError::BadStep(h));
    }
    let kf = k as f64;
    if (r.horizon() - kf).abs() > 1e-9 * kf {
        return Err(BoundsError::Profile(format!("profile covers [0, {}] instead of [0, {k}]", r.horizon())));
    }
    let mass = r.integral();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(BoundsError::Profile(format!("profile integrates to {mass}, expected 1")));
    }

    let rhs = |rate: f64, u: &[f64], out: &mut [f64]| {
        for l in 0..k {
            let next = if l + 1 < k { u[l + 1] } else { 0.0 };
            // d/ds with s = k - t running forward
            out[l] = (rate - u[l] + next).max(0.0);
        }
    };
    let mut u = vec![0.0; k];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for piece in r.pieces.iter().rev() {
        let len = piece.len();
        let steps = (len / h).ceil().max(1.0) as usize;
        let dt = len / steps as f64;
        for _ in 0..steps {
            rhs(piece.rate, &u, &mut k1);
            for l in 0..k {
                tmp[l] = u[l] + 0.5 * dt * k1[l];
            }
            rhs(piece.rate, &tmp, &mut k2);
            for l in 0..k {
                tmp[l] = u[l] + 0.5 * dt * k2[l];
            }
            rhs(piece.rate, &tmp, &mut k3);
            for l in 0..k {
                tmp[l] = u[l] + dt * k3[l];
            }
            rhs(piece.rate, &tmp, &mut k4);
            for l in 0..k {
                u[l] += dt / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
            }
        }
    }
    Ok(u[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::expected_min;

    #[test]
    fn uniform_profile_is_expected_min() {
        // constant r = 1/k accepts everything: u_0(0) = E[min(N, k)] / k
        for k in 1..=5 {
            let r = RateFunction::constant(k as f64, 1.0 / k as f64);
            let u = worst_case_ratio(&r, k, 1e-3).unwrap();
            let exact = expected_min(k as f64, k as u64) / k as f64;
            assert!((u - exact).abs() < 1e-9, "k={k}: {u} vs {exact}");
        }
    }

    #[test]
    fn late_spike_tends_to_one() {
        let k = 2;
        let eps = 1e-3;
        let r = RateFunction::from_breakpoints(&[0.0, 2.0 - eps, 2.0], &[0.0, 1.0 / eps]);
        let u = worst_case_ratio(&r, k, 1e-4).unwrap();
        assert!(u > 0.99, "{u}");
    }

    #[test]
    fn profile_must_be_normalised() {
        let r = RateFunction::constant(2.0, 1.0);
        assert!(matches!(worst_case_ratio(&r, 2, 1e-3), Err(BoundsError::Profile(_))));
        let r = RateFunction::constant(3.0, 1.0 / 3.0);
        assert!(matches!(worst_case_ratio(&r, 2, 1e-3), Err(BoundsError::Profile(_))));
    }
}
