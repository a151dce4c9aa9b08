//! Statistical plumbing: seeded RNG derivation, Bernoulli test design, medians
//! and log-log least squares.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

/// Deterministic RNG used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Build the simulator RNG from a seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 step, used to derive independent per-trial seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream of sub-seeds from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0xA5A5_A5A5_5A5A_5A5A)));
    }
    s
}

/// A designed two-point Bernoulli test: draw `shots` samples and decide
/// "high" iff at least `threshold` successes are seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernoulliTest {
    pub shots: u64,
    pub threshold: u64,
}

/// Design the cheapest fixed-shot test distinguishing success probabilities
/// `<= p_low` from `>= p_high` with error at most `failure` on each side.
///
/// Uses exact binomial tails, so no slack constant enters the shot count.
pub fn design_bernoulli_test(p_low: f64, p_high: f64, failure: f64) -> Option<BernoulliTest> {
    if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) {
        return None;
    }
    if p_high - p_low < 1e-9 || failure <= 0.0 {
        return None;
    }
    let feasible = |shots: u64| feasible_threshold(p_low, p_high, failure, shots);
    // Exponential search for a feasible shot count, then binary refine.
    let mut hi = 1u64;
    let cap = 1u64 << 40;
    while feasible(hi).is_none() {
        hi *= 2;
        if hi > cap {
            return None;
        }
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    feasible(hi).map(|threshold| BernoulliTest { shots: hi, threshold })
}

fn feasible_threshold(p_low: f64, p_high: f64, failure: f64, shots: u64) -> Option<u64> {
    let low = Binomial::new(p_low.clamp(0.0, 1.0), shots).ok()?;
    let high = Binomial::new(p_high.clamp(0.0, 1.0), shots).ok()?;
    // Smallest m with P[Bin(shots, p_low) >= m] <= failure.
    let mut lo = 0u64;
    let mut hi = shots + 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let tail = if mid == 0 { 1.0 } else { 1.0 - low.cdf(mid - 1) };
        if tail <= failure {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let m = lo;
    if m > shots {
        return None;
    }
    // Check the miss side: P[Bin(shots, p_high) < m] <= failure.
    let miss = if m == 0 { 0.0 } else { high.cdf(m - 1) };
    (miss <= failure).then_some(m)
}

/// Smallest odd repetition count whose majority vote over trials with
/// individual failure probability `q` fails with probability at most `target`.
pub fn majority_repetitions(q: f64, target: f64) -> u64 {
    if q <= target {
        return 1;
    }
    let mut r = 3u64;
    while r < 10_001 {
        let dist = Binomial::new(q.clamp(0.0, 1.0), r).expect("valid binomial");
        let need = r / 2; // majority fails iff failures >= ceil(r/2) = need+1 for odd r
        let fail = 1.0 - dist.cdf(need);
        if fail <= target {
            return r;
        }
        r += 2;
    }
    r
}

/// Median of a slice (average of the middle two for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares on (ln x, ln y); returns (slope, intercept, r^2).
///
/// `r^2` is reported as 1 when the responses are constant.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if xs.len() < 3 {
        return Err(Error::InsufficientData(xs.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-18 {
        1.0
    } else {
        let ss_res: f64 = pts
            .iter()
            .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
            .sum();
        1.0 - ss_res / syy
    };
    Ok((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..50u64 {
            for trial in 0..50u64 {
                assert!(seen.insert(derive_seed(42, &[cell, trial])));
            }
        }
    }

    #[test]
    fn bernoulli_test_meets_error_budget() {
        let t = design_bernoulli_test(0.1, 0.6, 1.0 / 12.0).unwrap();
        let low = Binomial::new(0.1, t.shots).unwrap();
        let high = Binomial::new(0.6, t.shots).unwrap();
        let false_high = 1.0 - low.cdf(t.threshold - 1);
        let false_low = high.cdf(t.threshold - 1);
        assert!(false_high <= 1.0 / 12.0);
        assert!(false_low <= 1.0 / 12.0);
        assert!(t.shots < 40, "expected a small design, got {}", t.shots);
    }

    #[test]
    fn bernoulli_test_certain_cases() {
        // p_low = 0, p_high = 1 needs a single shot.
        let t = design_bernoulli_test(0.0, 1.0, 0.01).unwrap();
        assert_eq!(t.shots, 1);
        assert_eq!(t.threshold, 1);
    }

    #[test]
    fn bernoulli_test_tiny_gap_rejected() {
        assert!(design_bernoulli_test(0.5, 0.5, 0.1).is_none());
    }

    #[test]
    fn majority_reps_grow_with_target() {
        let r1 = majority_repetitions(0.19, 1.0 / 12.0);
        let r2 = majority_repetitions(0.19, 1.0 / 300.0);
        assert!(r1 <= r2);
        assert_eq!(r1 % 2, 1);
        // Exact check for the returned count.
        let dist = Binomial::new(0.19, r2).unwrap();
        assert!(1.0 - dist.cdf(r2 / 2) <= 1.0 / 300.0);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn loglog_exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x| (x, 100.0 / x))
            .collect();
        let (slope, intercept, r2) = fit_loglog(&pts).unwrap();
        assert!((slope + 1.0).abs() < 1e-9);
        assert!((intercept - 100.0f64.ln()).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loglog_constant_slope_zero() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0].iter().map(|&x| (x, 5.0)).collect();
        let (slope, _, r2) = fit_loglog(&pts).unwrap();
        assert!(slope.abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_requires_three_points() {
        assert!(matches!(
            fit_loglog(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(Error::InsufficientData(2))
        ));
    }
}
