//! Bernoulli Kullback-Leibler divergence and the KL confidence upper bound.
//!
//! The upper bound `CB(m, I, δ)` is the largest `u ∈ [m, 1]` with
//! `I · D(m ‖ u) ≤ ln(1/δ)`. The map `u ↦ D(m ‖ u)` is strictly increasing and
//! convex on `[m, 1)`, so the root is found with a safeguarded Newton
//! iteration that falls back to bisection whenever a step leaves the bracket.

use crate::error::{check_unit, Error, Result};

/// Absolute accuracy of [`confidence_upper_bound`].
pub const CB_TOLERANCE: f64 = 1e-12;

const MAX_ITERATIONS: usize = 200;

#[inline]
fn xlogx_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

#[inline]
pub(crate) fn kl_unchecked(u: f64, v: f64) -> f64 {
    xlogx_over(u, v) + xlogx_over(1.0 - u, 1.0 - v)
}

/// `D(u ‖ v)` between Bernoulli(u) and Bernoulli(v), with `0 · ln 0 = 0`.
///
/// Returns `+∞` when the support of `u` is not covered by `v`
/// (`u > 0, v = 0` or `u < 1, v = 1`).
pub fn bernoulli_kl(u: f64, v: f64) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    Ok(kl_unchecked(u, v).max(0.0))
}

/// KL confidence upper bound on a Bernoulli mean observed as `m` over
/// `num_paths` trials, at confidence parameter `confidence` (δ).
///
/// `confidence = 1` is accepted and yields `m` (empty budget).
pub fn confidence_upper_bound(m: f64, num_paths: u64, confidence: f64) -> Result<f64> {
    check_unit("m", m)?;
    if num_paths == 0 {
        return Err(Error::Config("num_paths must be at least 1".into()));
    }
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(Error::Domain {
            name: "confidence",
            value: confidence,
            domain: "(0, 1]",
        });
    }
    Ok(cb_unchecked(m, num_paths, confidence))
}

pub(crate) fn cb_unchecked(m: f64, num_paths: u64, confidence: f64) -> f64 {
    let budget = -confidence.ln();
    if budget <= 0.0 {
        return m;
    }
    if m >= 1.0 {
        return 1.0;
    }
    let trials = num_paths as f64;
    if m == 0.0 {
        // D(0 ‖ u) = ln(1/(1-u))
        return 1.0 - confidence.powf(1.0 / trials);
    }
    let level = budget / trials;
    let upper = 1.0 - CB_TOLERANCE;
    if m >= upper || kl_unchecked(m, upper) <= level {
        return 1.0;
    }
    newton_root(m, level, upper)
}

/// Root of `u ↦ D(m ‖ u) - level` on `(m, upper)`, where the function is
/// negative at `m` and positive at `upper`.
fn newton_root(m: f64, level: f64, upper: f64) -> f64 {
    let mut lo = m;
    let mut hi = upper;
    let start = m + (2.0 * m * level).sqrt() + level;
    let mut u = if start > lo && start < hi {
        start
    } else {
        0.5 * (lo + hi)
    };

    for _ in 0..MAX_ITERATIONS {
        let f = kl_unchecked(m, u) - level;
        if f == 0.0 {
            return u;
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let slope = (u - m) / (u * (1.0 - u));
        let mut next = u - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 || hi - lo <= 1e-14 {
            return next.clamp(m, 1.0);
        }
        u = next;
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Plain bisection written independently of the Newton path.
    fn bisection_cb(m: f64, i: u64, delta: f64) -> f64 {
        let kl = |a: f64, b: f64| {
            let t1 = if a > 0.0 { a * (a / b).ln() } else { 0.0 };
            let t2 = if a < 1.0 {
                (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
            } else {
                0.0
            };
            t1 + t2
        };
        let budget = (1.0 / delta).ln();
        let (mut lo, mut hi) = (m, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid >= 1.0 || (i as f64) * kl(m, mid) > budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    #[test]
    fn kl_examples() {
        assert_eq!(bernoulli_kl(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(bernoulli_kl(0.0, 0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            bernoulli_kl(0.5, 0.75).unwrap(),
            0.5 * (4.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            bernoulli_kl(0.5, 0.75).unwrap(),
            0.143841036225890,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kl_edges_and_domain() {
        assert_eq!(bernoulli_kl(0.2, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(bernoulli_kl(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(bernoulli_kl(0.0, 0.0).unwrap(), 0.0);
        assert!(bernoulli_kl(-0.1, 0.5).is_err());
        assert!(bernoulli_kl(0.5, 1.5).is_err());
        assert!(bernoulli_kl(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn cb_closed_form_at_zero() {
        for &(i, d) in &[(1u64, 0.5), (117, 0.01), (5235, 1e-3), (100_000, 1e-5)] {
            assert_eq!(
                confidence_upper_bound(0.0, i, d).unwrap(),
                1.0 - d.powf(1.0 / i as f64)
            );
        }
    }

    #[test]
    fn cb_empty_budget_returns_m() {
        assert_eq!(confidence_upper_bound(0.37, 10, 1.0).unwrap(), 0.37);
        let near = confidence_upper_bound(0.37, 10, 1.0 - 1e-12).unwrap();
        assert_abs_diff_eq!(near, 0.37, epsilon = 1e-5);
    }

    #[test]
    fn cb_reference_value() {
        // 100 · D(0.5 ‖ u) = ln 20, solved to 40 digits offline.
        let cb = confidence_upper_bound(0.5, 100, 0.05).unwrap();
        assert_abs_diff_eq!(cb, 0.620_576_821_069_569_9, epsilon = 1e-12);
        assert_abs_diff_eq!(cb, bisection_cb(0.5, 100, 0.05), epsilon = 1e-10);
    }

    #[test]
    fn cb_saturates() {
        assert_eq!(confidence_upper_bound(1.0, 5, 0.1).unwrap(), 1.0);
        // Tiny I with large budget pushes the root past 1 - tol.
        assert_eq!(confidence_upper_bound(0.999_999_999_9, 1, 1e-300).unwrap(), 1.0);
    }

    #[test]
    fn cb_domain_errors() {
        assert!(confidence_upper_bound(1.2, 5, 0.1).is_err());
        assert!(confidence_upper_bound(0.2, 0, 0.1).is_err());
        assert!(confidence_upper_bound(0.2, 5, 0.0).is_err());
        assert!(confidence_upper_bound(0.2, 5, 1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn kl_quadratic_lower_bound(u in 0.0f64..=1.0, v in 0.0f64..1.0) {
            let d = bernoulli_kl(u, v).unwrap();
            let m = u.max(v);
            if m > 0.0 {
                let lb = (u - v).powi(2) / (2.0 * m);
                prop_assert!(d >= lb - 1e-12 * (1.0 + lb), "D={d} lb={lb}");
            }
        }

        #[test]
        fn cb_matches_bisection(m in 0.0f64..=1.0, i in 1u64..1_000_000, log_d in -20.0f64..-1e-3) {
            let delta = log_d.exp();
            let cb = confidence_upper_bound(m, i, delta).unwrap();
            prop_assert!(cb >= m);
            prop_assert!((cb - bisection_cb(m, i, delta)).abs() <= 1e-10);
        }

        #[test]
        fn cb_monotone(m in 0.0f64..0.99, dm in 0.0f64..0.01, i in 1u64..10_000, d in 1e-6f64..0.9, dd in 0.0f64..0.09) {
            let base = confidence_upper_bound(m, i, d).unwrap();
            prop_assert!(confidence_upper_bound(m + dm, i, d).unwrap() >= base - 1e-12);
            prop_assert!(confidence_upper_bound(m, i + 1, d).unwrap() <= base + 1e-12);
            prop_assert!(confidence_upper_bound(m, i, d + dd).unwrap() <= base + 1e-12);
        }
    }
}
