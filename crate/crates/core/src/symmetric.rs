//! Evaluation of arbitrary total non-constant symmetric Boolean functions:
//! the central-plateau reduction to two threshold tests, erf-window bisection
//! of the block-encoded weight, and the alpha-interpolated Hamming-weight
//! estimator that trades coherent depth for samples.

use serde::{Deserialize, Serialize};

use crate::block::{apply_qsvt, BlockEncoding, OracleInput};
use crate::config::Tuning;
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::poly::shifted_erf_step;
use crate::special::erf_inv;
use crate::stats::SimRng;
use crate::threshold::{interpolated_plan, threshold_decide, SolveOutcome};

/// Leakage parameter of every bisection round (a free O(1) choice).
const ROUND_ETA: f64 = 0.25;

/// A total symmetric Boolean function given by its value at each Hamming
/// weight. Constant tables are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricFunction {
    table: Vec<bool>,
}

impl SymmetricFunction {
    pub fn new(table: Vec<bool>) -> Result<Self> {
        if table.len() < 2 || !(table.len() - 1).is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "table must have N + 1 entries for power-of-two N, got {}",
                table.len()
            )));
        }
        let first = table[0];
        if table.iter().all(|&v| v == first) {
            return Err(Error::InvalidInput("constant symmetric function".into()));
        }
        Ok(Self { table })
    }

    /// Parse a JSON array of 0/1 of length N + 1.
    pub fn from_json_table(s: &str) -> Result<Self> {
        let raw: Vec<u8> = serde_json::from_str(s)?;
        let table = raw
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidInput(format!("table entry {other} not 0/1"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::new(table)
    }

    pub fn parity(n: usize) -> Result<Self> {
        Self::new((0..=n).map(|w| w % 2 == 1).collect())
    }

    pub fn majority(n: usize) -> Result<Self> {
        Self::new((0..=n).map(|w| w > n / 2).collect())
    }

    /// The threshold function as a table.
    pub fn threshold_fn(n: usize, k: u64) -> Result<Self> {
        Self::new((0..=n).map(|w| w as u64 > k).collect())
    }

    /// Input size N.
    pub fn n(&self) -> usize {
        self.table.len() - 1
    }

    pub fn value_at_weight(&self, w: u64) -> bool {
        self.table[w as usize]
    }

    pub fn apply(&self, input: &OracleInput) -> bool {
        self.value_at_weight(input.hamming_weight())
    }

    /// Half-width of the central weight plateau: the largest `g` with
    /// `g = N mod 2` such that the table is constant on integer weights in
    /// `[(N-g)/2, (N+g)/2]`; 0 when no such centered plateau exists.
    pub fn gamma(&self) -> u64 {
        let n = self.n() as u64;
        let mut best = 0;
        let mut g = n % 2;
        while g <= n {
            let lo = (n - g) / 2;
            let hi = (n + g) / 2;
            let first = self.table[lo as usize];
            if (lo..=hi).all(|w| self.table[w as usize] == first) {
                best = g;
            } else {
                break;
            }
            g += 2;
        }
        best
    }
}

/// Interval bracketing the block-encoded value `sqrt(|x| / N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightWindow {
    pub lo: f64,
    pub hi: f64,
}

impl WeightWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || lo < -1.0 || hi > 1.0 {
            return Err(Error::InvalidInput(format!("bad window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lo - 1e-12 && z <= self.hi + 1e-12
    }
}

/// One bisection round at the spec steepness `kappa = 2 erf^-1(1-2 eta) / w`:
/// sample the erf-step flag and invert the measured probability into a
/// sub-window. The returned window is never wider than half the input and
/// contains the true value with probability at least `1 - e_budget`.
pub fn cut_in_half(
    be: &BlockEncoding,
    window: WeightWindow,
    e_budget: f64,
    tuning: &Tuning,
    ledger: &mut QueryLedger,
    seed: u64,
) -> Result<WeightWindow> {
    let mut rng = crate::stats::rng_from_seed(seed);
    let kappa = 2.0 * erf_inv(1.0 - 2.0 * ROUND_ETA) / window.width().max(1e-12);
    match window_round(be, window, kappa, u64::MAX, e_budget, tuning, ledger, &mut rng)? {
        Some(w) => Ok(w),
        None => Err(Error::Internal("bisection round was uninformative".into())),
    }
}

/// Largest gap in measured probability `2u` such that any probability band of
/// height `2u` pins the value into a sub-window of width at most `cap`.
fn widest_feasible_u(zs: &[f64], qs: &[f64], cap: f64) -> f64 {
    let worst_band = |u: f64| -> f64 {
        let mut worst = 0.0f64;
        for i in 0..zs.len() {
            for j in (i + 1)..zs.len() {
                if (qs[i] - qs[j]).abs() <= 2.0 * u {
                    worst = worst.max(zs[j] - zs[i]);
                }
            }
        }
        worst
    };
    let mut lo = 0.0;
    let mut hi = 0.5;
    for _ in 0..25 {
        let mid = 0.5 * (lo + hi);
        if worst_band(mid) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Shared round implementation; `kappa_request` may be lowered to fit
/// `deg_budget`. Returns `None` when no informative round fits the budget.
#[allow(clippy::too_many_arguments)]
pub(crate) fn window_round(
    be: &BlockEncoding,
    window: WeightWindow,
    kappa_request: f64,
    deg_budget: u64,
    e_budget: f64,
    tuning: &Tuning,
    ledger: &mut QueryLedger,
    rng: &mut SimRng,
) -> Result<Option<WeightWindow>> {
    let w = window.width();
    if w <= 1e-12 {
        return Ok(Some(window));
    }
    let center = window.center();
    let mut kappa = kappa_request.max(1e-3);
    let mut built = None;
    for _ in 0..60 {
        let eps = round_eps(kappa, w);
        let (poly, _kq) = shifted_erf_step(kappa, center, eps)?;
        if poly.degree() as u64 <= deg_budget && poly.degree() >= 1 {
            built = Some(poly);
            break;
        }
        kappa /= 2f64.powf(0.25);
        if kappa * w < 1e-3 {
            break;
        }
    }
    let Some(poly) = built else {
        return Ok(None);
    };

    // Exact flag probabilities over the window.
    const COARSE: usize = 65;
    const FINE: usize = 257;
    let grid = |n: usize| -> (Vec<f64>, Vec<f64>) {
        let zs: Vec<f64> = (0..n)
            .map(|i| window.lo + w * i as f64 / (n - 1) as f64)
            .collect();
        let qs: Vec<f64> = zs
            .iter()
            .map(|&z| {
                let v = poly.eval_unchecked(z.clamp(-1.0, 1.0));
                (v * v).min(1.0)
            })
            .collect();
        (zs, qs)
    };
    let (czs, cqs) = grid(COARSE);
    let u_star = 0.9 * widest_feasible_u(&czs, &cqs, 0.44 * w);
    if u_star < 1e-5 {
        return Ok(None);
    }

    // Sample count: the calibrated baseline of the halving lemma, raised when
    // the measured inversion needs tighter precision.
    let sigma = ROUND_ETA / 8.0;
    let s_spec = (tuning.c_samples * (1.0 / e_budget).ln() / (sigma * sigma)).ceil() as u64;
    let s_star = ((2.0 / e_budget).ln() / (2.0 * (0.9 * u_star).powi(2))).ceil() as u64;
    let shots = s_spec.max(s_star).max(1);

    let transformed = apply_qsvt(be, &poly)?;
    let state = transformed.canonical_right_state()?;
    let ones = transformed.sample_flag(&state, shots, ledger, rng)?;
    let p_hat = ones as f64 / shots as f64;

    // Invert on the fine grid; the pad covers between-grid values.
    let (fzs, fqs) = grid(FINE);
    let pad = w / (FINE - 1) as f64;
    let band = |u: f64| -> Option<(f64, f64)> {
        let mut first = None;
        let mut last = None;
        for (i, &q) in fqs.iter().enumerate() {
            if (q - p_hat).abs() <= u {
                if first.is_none() {
                    first = Some(i);
                }
                last = Some(i);
            }
        }
        first.map(|f| (fzs[f], fzs[last.unwrap()]))
    };
    let hull = match band(u_star) {
        Some(h) => h,
        None => {
            // The measurement landed outside the window's probability range;
            // pin the window to the closest grid point.
            let best = fqs
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - p_hat).abs().partial_cmp(&(b.1 - p_hat).abs()).unwrap()
                })
                .map(|(i, _)| fzs[i])
                .unwrap();
            (best, best)
        }
    };
    let mut u = u_star;
    let mut hull = hull;
    // The width bound must hold unconditionally; shrink the acceptance band
    // in the (rare) case the coarse estimate was optimistic.
    while hull.1 - hull.0 + 2.0 * pad > 0.5 * w && u > 1e-9 {
        u *= 0.7;
        if let Some(h) = band(u) {
            hull = h;
        } else {
            hull = (hull.0.midpoint(hull.1), hull.0.midpoint(hull.1));
        }
    }
    let lo = (hull.0 - pad).max(window.lo);
    let hi = (hull.1 + pad).min(window.hi);
    Ok(Some(WeightWindow { lo, hi }))
}

/// Polynomial error budget of a round: fixed at `eta/8` while the step is
/// fully resolved, shrinking once the capped steepness flattens the window
/// so the approximant stays monotone across it.
fn round_eps(kappa: f64, width: f64) -> f64 {
    let cap = (ROUND_ETA / 8.0).min(0.1 * kappa * width);
    // Quantize to a power of two so the polynomial cache stays small.
    2f64.powi(cap.max(1e-6).log2().floor() as i32)
}

/// Result of a weight estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightEstimate {
    pub weight: u64,
    pub fallback: bool,
}

/// Estimate the Hamming weight by repeated window bisection.
///
/// `alpha` interpolates the schedule: rounds run at full steepness until the
/// window reaches `Delta^(1-alpha)`, after which the steepness is capped and
/// extra samples compensate (`alpha = 0` is the deepest, cheapest schedule,
/// `alpha = 1` the shallowest). Succeeds with probability at least 2/3.
pub fn estimate_hamming_weight(
    input: &OracleInput,
    depth: u64,
    alpha: f64,
    ledger: &mut QueryLedger,
    seed: u64,
    tuning: &Tuning,
) -> Result<WeightEstimate> {
    let n = input.len() as f64;
    let delta = (1.0 - ((n - 1.0) / n).sqrt()) / 2.0;
    let mut rng = crate::stats::rng_from_seed(seed);
    estimate_weight_inner(input, depth, alpha, 1.0 / 3.0, delta, tuning, ledger, &mut rng)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_weight_inner(
    input: &OracleInput,
    depth: u64,
    alpha: f64,
    failure: f64,
    delta_target: f64,
    tuning: &Tuning,
    ledger: &mut QueryLedger,
    rng: &mut SimRng,
) -> Result<WeightEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    let n = input.len() as u64;
    let deg_budget = tuning.degree_budget(depth);
    if deg_budget < 2 {
        ledger.record_circuits(1, n)?;
        return Ok(WeightEstimate { weight: input.hamming_weight(), fallback: true });
    }
    let be = BlockEncoding::threshold(input, tuning.cost_multiplier)?;
    let sigma_of = |weight: u64| (weight as f64 / n as f64).sqrt();

    // Candidate weights whose encoded value lies inside the window.
    let candidates = |win: &WeightWindow| -> (u64, u64) {
        let lo = (win.lo.max(0.0).powi(2) * n as f64 - 1e-9).ceil().max(0.0) as u64;
        let hi = ((win.hi.powi(2) * n as f64 + 1e-9).floor() as u64).min(n);
        (lo, hi.max(lo))
    };

    let delta_prime = delta_target.powf(1.0 - alpha).clamp(delta_target, 1.0);
    let kappa_alpha = 2.0 * erf_inv(1.0 - 2.0 * ROUND_ETA) / delta_prime;
    let max_rounds = ((1.0 / delta_target).log2().ceil() as u64 + 6).max(4);
    let e_round = failure / max_rounds as f64;

    let mut window = WeightWindow { lo: 0.0, hi: 1.0 };
    for _ in 0..max_rounds {
        let (clo, chi) = candidates(&window);
        if clo >= chi {
            return Ok(WeightEstimate { weight: clo, fallback: false });
        }
        let kappa_full = 2.0 * erf_inv(1.0 - 2.0 * ROUND_ETA) / window.width();
        let kappa = kappa_full.min(kappa_alpha);
        match window_round(&be, window, kappa, deg_budget, e_round, tuning, ledger, rng)? {
            Some(next) => window = next,
            None => break,
        }
    }
    // Window failed to isolate a unique weight: report the nearest candidate.
    let (clo, chi) = candidates(&window);
    let center = window.center();
    let weight = (clo..=chi)
        .min_by(|&a, &b| {
            (sigma_of(a) - center)
                .abs()
                .partial_cmp(&(sigma_of(b) - center).abs())
                .unwrap()
        })
        .unwrap_or(clo);
    Ok(WeightEstimate { weight, fallback: false })
}

/// Zone of the input weight relative to the plateau `[k, k']`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Zone {
    Low,
    In,
    High,
}

fn exact_zone(w: u64, k: u64, k_hi: u64) -> Zone {
    if w < k {
        Zone::Low
    } else if w > k_hi {
        Zone::High
    } else {
        Zone::In
    }
}

/// Deterministic branch output given an exact zone and weight: what the
/// solver computes once its probabilistic sub-steps are correct.
pub(crate) fn branch_output(f: &SymmetricFunction, w: u64) -> bool {
    let n = f.n() as u64;
    let gamma = f.gamma();
    let k = (n - gamma) / 2;
    let k_hi = (n + gamma) / 2;
    match exact_zone(w, k, k_hi) {
        Zone::In => f.value_at_weight(k),
        Zone::Low | Zone::High => f.value_at_weight(w),
    }
}

/// Evaluate a non-constant total symmetric function within the depth budget:
/// two threshold tests locate the weight relative to the central plateau and
/// a weight estimation on the cheap side resolves the rest. Succeeds with
/// probability at least 2/3.
pub fn solve_symmetric(
    f: &SymmetricFunction,
    input: &OracleInput,
    depth: u64,
    alpha: f64,
    ledger: &mut QueryLedger,
    seed: u64,
    tuning: &Tuning,
) -> Result<SolveOutcome> {
    let n = f.n() as u64;
    if input.len() as u64 != n {
        return Err(Error::InvalidInput(format!(
            "input size {} does not match table size {n}",
            input.len()
        )));
    }
    let gamma = f.gamma();
    let k = (n - gamma) / 2;
    let k_hi = (n + gamma) / 2;
    debug_assert!(k >= 1 && k_hi <= n - 1);

    // Failure budget: 1/12 per zone test, 1/6 for the weight estimate.
    let zone_failure = 1.0 / 12.0;
    let weight_failure = 1.0 / 6.0;
    let deg_budget = tuning.degree_budget(depth);

    // If any required sub-plan cannot fit the budget, answer classically once.
    let plan_fallback = |k_test: u64| -> Result<bool> {
        if k_test >= n {
            return Ok(false);
        }
        let complemented = k_test > n / 2;
        let k_eff = if complemented { n - k_test - 1 } else { k_test };
        Ok(interpolated_plan(n, k_eff, deg_budget, zone_failure, tuning)?.fallback)
    };
    if deg_budget < 2 || plan_fallback(k - 1)? || plan_fallback(k_hi)? {
        ledger.record_circuits(1, n)?;
        let w = input.hamming_weight();
        return Ok(SolveOutcome { answer: f.value_at_weight(w), fallback: true });
    }

    let mut rng = crate::stats::rng_from_seed(seed);
    let delta_sym = (((n - gamma) as f64).sqrt() - ((n - gamma - 1) as f64).sqrt())
        / (2.0 * (n as f64).sqrt());

    // Is |x| >= k?
    let above_low =
        threshold_decide(input, k - 1, depth, zone_failure, tuning, ledger, &mut rng)?;
    if !above_low.answer {
        let est = estimate_weight_inner(
            input, depth, alpha, weight_failure, delta_sym, tuning, ledger, &mut rng,
        )?;
        return Ok(SolveOutcome {
            answer: f.value_at_weight(est.weight.min(n)),
            fallback: est.fallback,
        });
    }
    // Is |x| > k'?
    let above_high = threshold_decide(input, k_hi, depth, zone_failure, tuning, ledger, &mut rng)?;
    if above_high.answer {
        let complement = input.complement();
        let est = estimate_weight_inner(
            &complement, depth, alpha, weight_failure, delta_sym, tuning, ledger, &mut rng,
        )?;
        return Ok(SolveOutcome {
            answer: f.value_at_weight(n.saturating_sub(est.weight)),
            fallback: est.fallback,
        });
    }
    Ok(SolveOutcome { answer: f.value_at_weight(k), fallback: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::derive_seed;

    #[test]
    fn symmetric_function_construction() {
        assert!(SymmetricFunction::new(vec![true, true, true]).is_err());
        assert!(SymmetricFunction::new(vec![false, true]).is_err()); // N = 0? table len 2 => N=1 ok
        let parity = SymmetricFunction::parity(8).unwrap();
        assert_eq!(parity.n(), 8);
        assert!(parity.value_at_weight(3));
        assert!(!parity.value_at_weight(4));
        let f = SymmetricFunction::from_json_table("[0,1,0,1,0]").unwrap();
        assert_eq!(f, SymmetricFunction::parity(4).unwrap());
        assert!(SymmetricFunction::from_json_table("[0,1,2]").is_err());
    }

    #[test]
    fn gamma_examples() {
        // Threshold at N/2 (flips at weight 5): the center sits on a flip
        // boundary, so gamma = 0.
        let thr = SymmetricFunction::threshold_fn(8, 4).unwrap();
        assert_eq!(thr.gamma(), 0);
        assert_eq!(SymmetricFunction::parity(8).unwrap().gamma(), 0);
        // Brute-force scan oracle for a handful of functions.
        for f in [
            SymmetricFunction::majority(8).unwrap(),
            SymmetricFunction::threshold_fn(8, 0).unwrap(),
            SymmetricFunction::new(vec![
                true, true, false, false, false, false, false, true, true,
            ])
            .unwrap(),
        ] {
            let n = f.n() as u64;
            let brute = {
                let mut best = 0;
                let mut g = n % 2;
                loop {
                    if g > n {
                        break best;
                    }
                    let lo = (n - g) / 2;
                    let hi = (n + g) / 2;
                    let v = f.value_at_weight(lo);
                    if (lo..=hi).all(|w| f.value_at_weight(w) == v) {
                        best = g;
                        g += 2;
                    } else {
                        break best;
                    }
                }
            };
            assert_eq!(f.gamma(), brute);
        }
        // OR has a plateau covering weights 1..N-1.
        assert_eq!(SymmetricFunction::threshold_fn(8, 0).unwrap().gamma(), 6);
    }

    #[test]
    fn branch_structure_yields_f_exhaustively() {
        // With exact sub-steps, the branch logic reproduces f on every input
        // for every non-constant symmetric function on N in {2, 4, 8}.
        for n in [2usize, 4, 8] {
            for mask in 1..((1u32 << (n + 1)) - 1) {
                let table: Vec<bool> = (0..=n).map(|w| (mask >> w) & 1 == 1).collect();
                let f = match SymmetricFunction::new(table) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                for w in 0..=n as u64 {
                    assert_eq!(
                        branch_output(&f, w),
                        f.value_at_weight(w),
                        "n={n} mask={mask} w={w}"
                    );
                }
            }
        }
    }

    #[test]
    fn window_halving_monte_carlo() {
        let tuning = Tuning::default();
        let e_budget = 0.05;
        let mut retained = 0;
        let trials = 300;
        for t in 0..trials {
            let z = 0.3 + 0.4 * (t as f64 / trials as f64);
            let be = BlockEncoding::scalar(z, 1).unwrap();
            let window = WeightWindow::new((z - 0.2).max(0.0), (z + 0.2).min(1.0)).unwrap();
            let mut ledger = QueryLedger::new(1 << 20).unwrap();
            let out = cut_in_half(&be, window, e_budget, &tuning, &mut ledger, 900 + t).unwrap();
            assert!(out.width() <= window.width() / 2.0 + 1e-12, "width {}", out.width());
            if out.contains(z) {
                retained += 1;
            }
        }
        let freq = retained as f64 / trials as f64;
        assert!(freq >= 1.0 - e_budget - 0.04, "retention {freq}");
    }

    #[test]
    fn window_round_degenerate_is_identity() {
        let tuning = Tuning::default();
        let be = BlockEncoding::scalar(0.5, 1).unwrap();
        let window = WeightWindow::new(0.5, 0.5).unwrap();
        let mut ledger = QueryLedger::new(4).unwrap();
        let out = cut_in_half(&be, window, 0.05, &tuning, &mut ledger, 1).unwrap();
        assert_eq!(out, window);
        assert_eq!(ledger.summary().total, 0);
    }

    #[test]
    fn round_cost_scales_inversely_with_width() {
        let tuning = Tuning::default();
        let mut pts = Vec::new();
        for width in [0.2, 0.1, 0.05, 0.025] {
            let z = 0.5;
            let be = BlockEncoding::scalar(z, 1).unwrap();
            let window = WeightWindow::new(z - width / 2.0, z + width / 2.0).unwrap();
            let mut ledger = QueryLedger::new(1 << 20).unwrap();
            cut_in_half(&be, window, 0.05, &tuning, &mut ledger, 7).unwrap();
            let max_depth = ledger.summary().max_coherent;
            pts.push((1.0 / width, max_depth as f64));
        }
        let (slope, _, _) = crate::stats::fit_loglog(&pts).unwrap();
        assert!((0.8..=1.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn estimate_weight_zero_input() {
        let tuning = Tuning::default();
        for alpha in [0.0, 0.5, 1.0] {
            let input = OracleInput::new(vec![false; 16]).unwrap();
            let mut ledger = QueryLedger::new(256).unwrap();
            let est =
                estimate_hamming_weight(&input, 256, alpha, &mut ledger, 3, &tuning).unwrap();
            assert_eq!(est.weight, 0);
        }
    }

    #[test]
    fn estimate_weight_exhaustive_small() {
        let tuning = Tuning::default();
        let n = 8usize;
        let depth = 4096u64;
        for mask in 0..(1u32 << n) {
            let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
            let input = OracleInput::new(bits).unwrap();
            let w = input.hamming_weight();
            let trials = 15;
            let mut hits = 0;
            for t in 0..trials {
                let mut ledger = QueryLedger::new(depth).unwrap();
                let seed = derive_seed(13, &[mask as u64, t]);
                let est =
                    estimate_hamming_weight(&input, depth, 1.0, &mut ledger, seed, &tuning)
                        .unwrap();
                if est.weight == w {
                    hits += 1;
                }
            }
            assert!(hits * 3 >= trials * 2, "weight {w}: {hits}/{trials}");
        }
    }

    #[test]
    fn alpha_trades_depth_for_samples() {
        let tuning = Tuning::default();
        let n = 64usize;
        let mut bits = vec![false; n];
        for b in bits.iter_mut().take(5) {
            *b = true;
        }
        let input = OracleInput::new(bits).unwrap();
        let depth = 1 << 13;
        let stats = |alpha: f64| -> (f64, f64) {
            let mut totals = Vec::new();
            let mut depths = Vec::new();
            for s in 0..9 {
                let mut ledger = QueryLedger::new(depth).unwrap();
                estimate_hamming_weight(&input, depth, alpha, &mut ledger, 50 + s, &tuning)
                    .unwrap();
                totals.push(ledger.summary().total as f64);
                depths.push(ledger.summary().max_coherent as f64);
            }
            (crate::stats::median(&totals), crate::stats::median(&depths))
        };
        let (total0, depth0) = stats(0.0);
        let (total1, depth1) = stats(1.0);
        assert!(depth0 >= depth1, "max coherent {depth0} vs {depth1}");
        assert!(total0 <= total1, "total {total0} vs {total1}");
    }

    #[test]
    fn solve_symmetric_majority_all_ones() {
        let tuning = Tuning::default();
        let f = SymmetricFunction::majority(8).unwrap();
        let input = OracleInput::new(vec![true; 8]).unwrap();
        let mut ledger = QueryLedger::new(64).unwrap();
        let out = solve_symmetric(&f, &input, 64, 0.5, &mut ledger, 2, &tuning).unwrap();
        assert!(out.answer);
    }

    #[test]
    fn solve_symmetric_parity_exhaustive_n4() {
        let tuning = Tuning::default();
        let f = SymmetricFunction::parity(4).unwrap();
        let depth = 16u64;
        for mask in 0..16u32 {
            let bits: Vec<bool> = (0..4).map(|i| (mask >> i) & 1 == 1).collect();
            let input = OracleInput::new(bits).unwrap();
            let truth = f.apply(&input);
            let trials = 33;
            let mut hits = 0;
            for t in 0..trials {
                let mut ledger = QueryLedger::new(depth).unwrap();
                let seed = derive_seed(19, &[mask as u64, t]);
                let out =
                    solve_symmetric(&f, &input, depth, 0.5, &mut ledger, seed, &tuning).unwrap();
                assert!(ledger.summary().max_coherent <= depth);
                if out.answer == truth {
                    hits += 1;
                }
            }
            assert!(hits * 3 >= trials * 2, "mask {mask}: {hits}/{trials}");
        }
    }

    #[test]
    fn solve_symmetric_wide_plateau_takes_in_branch() {
        // Plateau [2, 6] on N = 8; inputs with weights inside take the "in"
        // branch whose output is f(2), and both zone tests point inward with
        // probability at least 1 - 1/12 each.
        let tuning = Tuning::default();
        let f = SymmetricFunction::new(vec![
            true, true, false, false, false, false, false, true, true,
        ])
        .unwrap();
        assert_eq!(f.gamma(), 4);
        let mut bits = vec![false; 8];
        bits[0] = true;
        bits[3] = true;
        bits[5] = true;
        bits[6] = true;
        let input = OracleInput::new(bits).unwrap();
        assert_eq!(input.hamming_weight(), 4);
        let trials = 50;
        let mut hits = 0;
        for t in 0..trials {
            let mut ledger = QueryLedger::new(32).unwrap();
            let out =
                solve_symmetric(&f, &input, 32, 0.5, &mut ledger, derive_seed(29, &[t]), &tuning)
                    .unwrap();
            if out.answer == f.apply(&input) {
                hits += 1;
            }
        }
        assert!(hits * 6 >= trials * 5, "in-branch correctness {hits}/{trials}");
    }
}
