//! Depth-limited solvers for the k-threshold function: the polynomial
//! interpolation solver and the amplitude-estimation parallelization solver.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::block::{basis_state, apply_qsvt, BlockEncoding, OracleInput};
use crate::config::Tuning;
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::poly::{erf_poly, step_from_erf, step_poly, BoundedPolynomial, StepSpec};
use crate::stats::{design_bernoulli_test, majority_repetitions, median, BernoulliTest, SimRng};

/// A threshold problem instance: decide whether the Hamming weight of the
/// input exceeds `k`.
#[derive(Debug, Clone)]
pub struct ThresholdInstance {
    pub input: OracleInput,
    pub k: u64,
}

impl ThresholdInstance {
    pub fn new(input: OracleInput, k: u64) -> Result<Self> {
        if k > input.len() as u64 {
            return Err(Error::InvalidInput(format!(
                "k = {k} exceeds input size {}",
                input.len()
            )));
        }
        Ok(Self { input, k })
    }

    pub fn truth(&self) -> bool {
        self.input.hamming_weight() > self.k
    }
}

/// What a solver run produced; query accounting lives in the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOutcome {
    pub answer: bool,
    /// Set when the run used the classical exhaustive fallback.
    pub fallback: bool,
}

/// Disjoint equal-size index bins from a seeded uniform permutation.
#[derive(Debug, Clone)]
pub struct PartitionPlan {
    bins: Vec<Vec<usize>>,
    seed: u64,
}

impl PartitionPlan {
    /// Partition `{0..n}` into `p` bins of size `n/p`; `p` must be a power of
    /// two dividing `n`.
    pub fn random(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || !p.is_power_of_two() || n % p != 0 {
            return Err(Error::InvalidInput(format!(
                "cannot split {n} indices into {p} equal bins"
            )));
        }
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = crate::stats::rng_from_seed(seed);
        indices.shuffle(&mut rng);
        let bin_size = n / p;
        let bins = indices.chunks(bin_size).map(|c| c.to_vec()).collect();
        Ok(Self { bins, seed })
    }

    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest number of ones landing in any bin.
    pub fn max_bin_weight(&self, input: &OracleInput) -> u64 {
        self.bins
            .iter()
            .map(|bin| bin.iter().filter(|&&i| input.bit(i)).count() as u64)
            .max()
            .unwrap_or(0)
    }
}

/// Exact canonical phase-estimation outcome probabilities for amplitude `a`
/// with `m` iterations: outcome `y` has the two-sided Fejer-kernel weight.
pub fn ae_outcome_distribution(a: f64, m: u64) -> Vec<f64> {
    let theta = a.clamp(0.0, 1.0).sqrt().asin();
    let phi = theta / std::f64::consts::PI;
    let m_f = m as f64;
    let kernel = |omega: f64| -> f64 {
        let frac = omega - omega.round();
        let s = (std::f64::consts::PI * frac).sin();
        if s.abs() < 1e-12 {
            1.0
        } else {
            let num = (m_f * std::f64::consts::PI * frac).sin();
            (num / (m_f * s)).powi(2)
        }
    };
    (0..m)
        .map(|y| {
            let y_f = y as f64 / m_f;
            0.5 * (kernel(phi - y_f) + kernel(phi + y_f))
        })
        .collect()
}

pub(crate) fn draw_amplitude_estimate(a: f64, m: u64, rng: &mut SimRng) -> f64 {
    let probs = ae_outcome_distribution(a, m);
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    let mut outcome = m - 1;
    for (y, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            outcome = y as u64;
            break;
        }
    }
    let s = (std::f64::consts::PI * outcome as f64 / m as f64).sin();
    s * s
}

/// One draw from the exact amplitude-estimation outcome distribution for
/// `theta = arcsin(sqrt(a))` with `m` iterations; returns `sin^2(pi y / m)`.
///
/// Satisfies the canonical precision guarantee
/// `|est - a| <= 2 pi sqrt(a (1-a)) / m + pi^2 / m^2` with probability at
/// least `8 / pi^2`. Costs `m` coherent queries when charged by a solver.
pub fn amplitude_estimate(a: f64, m: u64, seed: u64) -> f64 {
    assert!(m >= 1, "amplitude estimation needs at least one iteration");
    let mut rng = crate::stats::rng_from_seed(seed);
    draw_amplitude_estimate(a, m, &mut rng)
}

// ---------------------------------------------------------------------------
// Interpolated solver
// ---------------------------------------------------------------------------

/// Immutable per-(n, k, budget) decision plan for the interpolated solver.
#[derive(Debug)]
pub(crate) struct InterpolatedPlan {
    pub poly: Option<BoundedPolynomial>,
    pub test: BernoulliTest,
    /// Largest flag probability over weights <= k.
    pub p_low: f64,
    /// Smallest flag probability over weights > k.
    pub p_high: f64,
    pub fallback: bool,
}

fn plan_cache() -> &'static Mutex<HashMap<(u64, u64, u64, u64, u64), Arc<InterpolatedPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64, u64, u64, u64), Arc<InterpolatedPlan>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Steepest erf step of degree at most `deg_budget` centered at `mu`.
fn capped_step(mu: f64, deg_budget: u64, kappa_hi: f64) -> Result<Option<(BoundedPolynomial, f64)>> {
    const EPS: f64 = 0.02;
    let fits = |kappa: f64| -> Result<Option<BoundedPolynomial>> {
        match erf_poly(kappa, mu, EPS) {
            Ok(p) if (p.degree() as u64) <= deg_budget && p.degree() >= 1 => Ok(Some(p)),
            Ok(_) => Ok(None),
            Err(Error::DegreeOverflow { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut lo = 0.05;
    if fits(lo)?.is_none() {
        return Ok(None);
    }
    let mut hi = kappa_hi.max(lo * 2.0);
    if let Some(p) = fits(hi)? {
        return Ok(Some((step_from_erf(&p), hi)));
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if fits(mid)?.is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.02 {
            break;
        }
    }
    Ok(fits(lo)?.map(|p| (step_from_erf(&p), lo)))
}

pub(crate) fn interpolated_plan(
    n: u64,
    k_eff: u64,
    deg_budget: u64,
    failure: f64,
    tuning: &Tuning,
) -> Result<Arc<InterpolatedPlan>> {
    let key = (n, k_eff, deg_budget, failure.to_bits(), tuning.cost_multiplier);
    if let Some(plan) = plan_cache().lock().expect("plan cache").get(&key) {
        return Ok(plan.clone());
    }
    let plan = Arc::new(build_interpolated_plan(n, k_eff, deg_budget, failure, tuning)?);
    plan_cache()
        .lock()
        .expect("plan cache")
        .insert(key, plan.clone());
    Ok(plan)
}

fn fallback_plan() -> InterpolatedPlan {
    InterpolatedPlan {
        poly: None,
        test: BernoulliTest { shots: 0, threshold: 0 },
        p_low: 0.0,
        p_high: 0.0,
        fallback: true,
    }
}

fn build_interpolated_plan(
    n: u64,
    k_eff: u64,
    deg_budget: u64,
    failure: f64,
    tuning: &Tuning,
) -> Result<InterpolatedPlan> {
    debug_assert!(k_eff < n);
    if deg_budget == 0 {
        return Ok(fallback_plan());
    }
    let sigma = |j: u64| (j as f64 / n as f64).sqrt();
    let delta = (sigma(k_eff + 1) - sigma(k_eff)) / 2.0;
    let mu = (sigma(k_eff + 1) + sigma(k_eff)) / 2.0;

    // Depth-driven leakage schedule, capped at the constant-regime value.
    let eta = (2f64.powf(-delta * deg_budget as f64 * tuning.c_eta)).min(0.125);
    let spec = StepSpec::new(delta, eta, mu)?;
    let full = step_poly(&spec)?;
    let poly = if full.degree() as u64 <= deg_budget {
        full
    } else {
        // The full-resolution step does not fit the budget: use the steepest
        // erf step that does and let the sample design absorb the smaller
        // per-shot gap.
        let kappa_full = crate::poly::step_kappa(&spec);
        match capped_step(mu, deg_budget, kappa_full)? {
            Some((p, _kappa)) => p,
            None => return Ok(fallback_plan()),
        }
    };

    // Exact decision levels over every possible Hamming weight.
    let mut p_low = 0.0f64;
    let mut p_high = 1.0f64;
    for j in 0..=n {
        let v = poly.eval(sigma(j))?;
        let prob = (v * v).min(1.0);
        if j <= k_eff {
            p_low = p_low.max(prob);
        } else {
            p_high = p_high.min(prob);
        }
    }
    if p_high - p_low < 1e-6 {
        return Ok(fallback_plan());
    }
    let Some(test) = design_bernoulli_test(p_low, p_high, failure) else {
        return Ok(fallback_plan());
    };
    let cost = test.shots * poly.degree() as u64 * tuning.cost_multiplier;
    if cost >= tuning.fallback_factor * n {
        return Ok(fallback_plan());
    }
    Ok(InterpolatedPlan { poly: Some(poly), test, p_low, p_high, fallback: false })
}

/// Classical exhaustive count: one cost-1 circuit per input bit.
fn classical_count(input: &OracleInput, ledger: &mut QueryLedger) -> Result<u64> {
    ledger.record_circuits(1, input.len() as u64)?;
    Ok(input.hamming_weight())
}

/// Decide `Threshold_k(x)` within the depth budget at the given failure
/// probability. Complement instances (`k > N/2`) run on the complement
/// block-encoding with the mirrored threshold.
pub(crate) fn threshold_decide(
    input: &OracleInput,
    k: u64,
    depth: u64,
    failure: f64,
    tuning: &Tuning,
    ledger: &mut QueryLedger,
    rng: &mut SimRng,
) -> Result<SolveOutcome> {
    let n = input.len() as u64;
    if k >= n {
        // |x| > N is impossible; no queries needed.
        return Ok(SolveOutcome { answer: false, fallback: false });
    }
    let complemented = k > n / 2;
    let k_eff = if complemented { n - k - 1 } else { k };
    let plan = interpolated_plan(n, k_eff, tuning.degree_budget(depth), failure, tuning)?;
    if plan.fallback {
        let w = classical_count(input, ledger)?;
        return Ok(SolveOutcome { answer: w > k, fallback: true });
    }
    let poly = plan.poly.as_ref().expect("non-fallback plan has a polynomial");
    let be = if complemented {
        BlockEncoding::complement(input, tuning.cost_multiplier)?
    } else {
        BlockEncoding::threshold(input, tuning.cost_multiplier)?
    };
    let transformed = apply_qsvt(&be, poly)?;
    let state = basis_state(transformed.dim(), 0);
    let ones = transformed.sample_flag(&state, plan.test.shots, ledger, rng)?;
    let high = ones >= plan.test.threshold;
    Ok(SolveOutcome { answer: high != complemented, fallback: false })
}

/// Interpolation strategy: transform the scalar block-encoding
/// `sqrt(|x|/N)` by a depth-capped step polynomial and decide from the flag
/// statistics. Succeeds with probability at least 2/3 on every input.
pub fn solve_threshold_interpolated(
    inst: &ThresholdInstance,
    depth: u64,
    ledger: &mut QueryLedger,
    seed: u64,
    tuning: &Tuning,
) -> Result<SolveOutcome> {
    let mut rng = crate::stats::rng_from_seed(seed);
    threshold_decide(
        &inst.input,
        inst.k,
        depth,
        tuning.solver_failure,
        tuning,
        ledger,
        &mut rng,
    )
}

// ---------------------------------------------------------------------------
// Parallel solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ParallelPlan {
    pub bins: u64,
    pub bin_size: u64,
    /// Grover iterations per amplitude-estimation circuit (1 in read mode).
    pub steps: u64,
    /// Median repetitions per bin.
    pub reps: u64,
    pub cost: u64,
}

impl ParallelPlan {
    pub fn read_mode(&self) -> bool {
        self.bin_size == 1
    }
}

/// Smallest even `m <= depth` estimating a bin of `bin_size` elements holding
/// up to `w_design` ones to within 1/2, by the canonical precision bound.
fn bin_steps(bin_size: u64, w_design: f64, depth: u64) -> Option<u64> {
    let m_f = bin_size as f64;
    let a = (w_design / m_f).clamp(0.0, 1.0);
    let err = |steps: f64| -> f64 {
        m_f * (2.0 * std::f64::consts::PI * (a * (1.0 - a)).sqrt() / steps
            + std::f64::consts::PI.powi(2) / (steps * steps))
    };
    let mut m = 2u64;
    while m <= depth {
        if err(m as f64) < 0.49 {
            return Some(m);
        }
        m += 2;
    }
    None
}

pub(crate) fn parallel_plan(n: u64, k_eff: u64, depth: u64, tuning: &Tuning) -> ParallelPlan {
    let mut best = ParallelPlan { bins: n, bin_size: 1, steps: 1, reps: 1, cost: n };
    let mut p = 1u64;
    while p < n {
        let m = n / p;
        let w_design = (tuning.c_bins
            * ((k_eff + 1) as f64 / p as f64).max(((p + 1) as f64).ln()))
        .min(m as f64);
        if let Some(steps) = bin_steps(m, w_design, depth) {
            // Single-run failure of canonical amplitude estimation.
            let q = 1.0 - 8.0 / std::f64::consts::PI.powi(2);
            let reps = majority_repetitions(q, 1.0 / (3.0 * p as f64));
            let cost = p * reps * steps;
            if cost < best.cost {
                best = ParallelPlan { bins: p, bin_size: m, steps, reps, cost };
            }
        }
        p *= 2;
    }
    best
}

pub(crate) fn run_parallel_with_plan(
    input: &OracleInput,
    k: u64,
    plan: &ParallelPlan,
    ledger: &mut QueryLedger,
    seed: u64,
) -> Result<SolveOutcome> {
    let n = input.len() as u64;
    let complemented = k > n / 2;
    let bits_eff = if complemented { input.complement() } else { input.clone() };
    let k_eff = if complemented { n - k - 1 } else { k };

    let partition = PartitionPlan::random(
        input.len(),
        plan.bins as usize,
        crate::stats::derive_seed(seed, &[1]),
    )?;
    let mut rng = crate::stats::rng_from_seed(crate::stats::derive_seed(seed, &[2]));

    let mut sum = 0.0f64;
    for bin in partition.bins() {
        let w = bin.iter().filter(|&&i| bits_eff.bit(i)).count() as u64;
        if plan.read_mode() {
            ledger.record_circuit(1)?;
            sum += w as f64;
            continue;
        }
        let m = plan.bin_size as f64;
        let a = w as f64 / m;
        let mut draws = Vec::with_capacity(plan.reps as usize);
        for _ in 0..plan.reps {
            ledger.record_circuit(plan.steps)?;
            draws.push(draw_amplitude_estimate(a, plan.steps, &mut rng));
        }
        let est_a = median(&draws);
        let est_w = est_a * m;
        let bound = m
            * (2.0 * std::f64::consts::PI * (est_a * (1.0 - est_a)).max(0.0).sqrt()
                / plan.steps as f64
                + std::f64::consts::PI.powi(2) / (plan.steps * plan.steps) as f64);
        sum += if bound < 0.5 { est_w.round() } else { est_w };
    }
    let answer_eff = sum > k_eff as f64;
    Ok(SolveOutcome { answer: answer_eff != complemented, fallback: false })
}

/// Parallelization strategy: randomly partition the indices into equal bins,
/// estimate each bin's weight by amplitude estimation within the depth
/// budget (degenerating to exact single-bit reads when bins shrink to size
/// one), and compare the summed estimate against `k`. A sum of exactly `k`
/// answers 0.
pub fn solve_threshold_parallel(
    inst: &ThresholdInstance,
    depth: u64,
    ledger: &mut QueryLedger,
    seed: u64,
    tuning: &Tuning,
) -> Result<SolveOutcome> {
    let n = inst.input.len() as u64;
    if inst.k >= n {
        return Ok(SolveOutcome { answer: false, fallback: false });
    }
    let k_eff = if inst.k > n / 2 { n - inst.k - 1 } else { inst.k };
    let plan = parallel_plan(n, k_eff, depth, tuning);
    run_parallel_with_plan(&inst.input, inst.k, &plan, ledger, seed)
}
