//! Certified bounded polynomials on [-1, 1] in the Chebyshev basis: the erf
//! approximant, the step polynomial built from it, and the window polynomial
//! formed as a difference of two steps.
//!
//! Construction is Chebyshev interpolation of the target at Chebyshev nodes,
//! truncated at the smallest degree whose dense-grid error meets the budget.
//! Certification is always by dense grid evaluation, independent of how a
//! polynomial was built.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erf, erf_inv};

/// Points per certification grid/interval.
pub const GRID_POINTS: usize = 10_000;
/// Hard cap on constructed polynomial degrees.
pub const DEGREE_CAP: usize = 10_000;
/// Tolerance on the range bound |p(x)| <= 1 over the grid.
pub const RANGE_SLACK: f64 = 1e-9;

/// Real polynomial on [-1, 1] stored as a Chebyshev series
/// `p(x) = c_0 + sum_k c_k T_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedPolynomial {
    basis: String,
    coeffs: Vec<f64>,
    degree: usize,
    certified_sup_error: f64,
}

/// Parameters of a step (or window) polynomial: transition half-width
/// `delta`, leakage `eta`, threshold location `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub delta: f64,
    pub eta: f64,
    pub mu: f64,
}

impl StepSpec {
    pub fn new(delta: f64, eta: f64, mu: f64) -> Result<Self> {
        let spec = Self { delta, eta, mu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "step delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::InvalidInput(format!(
                "step eta must lie in (0, 1/2), got {}",
                self.eta
            )));
        }
        if self.mu - self.delta < -1.0 || self.mu + self.delta > 1.0 {
            return Err(Error::InvalidInput(format!(
                "step band [{}, {}] leaves [-1, 1]",
                self.mu - self.delta,
                self.mu + self.delta
            )));
        }
        Ok(())
    }
}

/// Which certificate a polynomial is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Step,
    Window,
}

/// Outcome of [`certify_bounds`]: worst-case margins on the declared
/// intervals (negative margin = violation) and the range check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    /// `eta - max |p|` over the stop interval(s).
    pub stop_margin: f64,
    /// `min p - (1 - eta)` over the pass interval.
    pub pass_margin: f64,
    pub range_ok: bool,
}

impl BoundedPolynomial {
    /// Wrap a raw Chebyshev coefficient sequence, checking the range bound on
    /// the certification grid. No approximation target is claimed, so the
    /// certified error is 0 by convention.
    pub fn from_chebyshev(coeffs: Vec<f64>) -> Result<Self> {
        let coeffs = trim(coeffs);
        let p = Self {
            basis: "chebyshev".into(),
            degree: coeffs.len() - 1,
            coeffs,
            certified_sup_error: 0.0,
        };
        let m = p.grid_max_abs();
        if m > 1.0 + RANGE_SLACK {
            return Err(Error::InvalidInput(format!(
                "polynomial exceeds the range bound: sup |p| = {m}"
            )));
        }
        Ok(p)
    }

    fn from_parts(coeffs: Vec<f64>, certified_sup_error: f64) -> Self {
        let coeffs = trim(coeffs);
        Self {
            basis: "chebyshev".into(),
            degree: coeffs.len() - 1,
            coeffs,
            certified_sup_error,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn certified_sup_error(&self) -> f64 {
        self.certified_sup_error
    }

    /// Clenshaw evaluation; x must lie in [-1, 1] (up to RANGE_SLACK).
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x.abs() > 1.0 + RANGE_SLACK {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.eval_unchecked(x.clamp(-1.0, 1.0)))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (1..c.len()).rev() {
            let b = 2.0 * x * b1 - b2 + c[k];
            b2 = b1;
            b1 = b;
        }
        x * b1 - b2 + c[0]
    }

    /// Max of |p| over the uniform certification grid on [-1, 1].
    pub fn grid_max_abs(&self) -> f64 {
        uniform_grid(-1.0, 1.0, GRID_POINTS)
            .map(|x| self.eval_unchecked(x).abs())
            .fold(0.0, f64::max)
    }

    /// Coefficient-wise difference (used by the window construction).
    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let a = self.coeffs.get(k).copied().unwrap_or(0.0);
            let b = other.coeffs.get(k).copied().unwrap_or(0.0);
            *c = a - b;
        }
        Self::from_parts(coeffs, self.certified_sup_error + other.certified_sup_error)
    }

    /// Coefficients of `x -> p(a x + b)` as a Chebyshev series, valid when the
    /// affine image of [-1, 1] stays inside [-1, 1].
    pub fn compose_affine(&self, a: f64, b: f64) -> Result<Self> {
        if a.abs() + b.abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "affine map {a} x + {b} leaves [-1, 1]"
            )));
        }
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        out[0] = self.coeffs[0];
        if n == 1 {
            return Ok(Self::from_parts(out, self.certified_sup_error));
        }
        // Iterate T_k(a x + b) expressed in the Chebyshev basis of x.
        let mut t_prev = vec![1.0];
        let mut t_cur = vec![b, a];
        add_scaled(&mut out, &t_cur, self.coeffs[1]);
        for k in 2..n {
            // T_k = 2 (a x + b) T_{k-1} - T_{k-2}
            let mut t_next = mul_x(&t_cur);
            for v in t_next.iter_mut() {
                *v *= 2.0 * a;
            }
            add_scaled(&mut t_next, &t_cur, 2.0 * b);
            sub_in_place(&mut t_next, &t_prev);
            add_scaled(&mut out, &t_next, self.coeffs[k]);
            t_prev = t_cur;
            t_cur = t_next;
        }
        Ok(Self::from_parts(out, self.certified_sup_error))
    }

    /// Serialize to the cache format
    /// `{basis:"chebyshev", coeffs:[...], degree:n, certified_sup_error:e}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.basis != "chebyshev" {
            return Err(Error::InvalidInput(format!("unknown basis {}", p.basis)));
        }
        if p.degree != p.coeffs.len().saturating_sub(1) {
            return Err(Error::InvalidInput("degree/coeffs mismatch".into()));
        }
        Ok(p)
    }
}

fn trim(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    if coeffs.is_empty() {
        coeffs.push(0.0);
    }
    coeffs
}

fn add_scaled(target: &mut [f64], source: &[f64], scale: f64) {
    for (t, s) in target.iter_mut().zip(source.iter()) {
        *t += scale * s;
    }
}

fn sub_in_place(target: &mut Vec<f64>, source: &[f64]) {
    if target.len() < source.len() {
        target.resize(source.len(), 0.0);
    }
    for (t, s) in target.iter_mut().zip(source.iter()) {
        *t -= s;
    }
}

/// Multiply a Chebyshev series by x: x T_0 = T_1, x T_k = (T_{k+1} + T_{k-1})/2.
fn mul_x(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    out[1] += p[0];
    for (j, &c) in p.iter().enumerate().skip(1) {
        out[j + 1] += 0.5 * c;
        out[j - 1] += 0.5 * c;
    }
    out
}

/// Inclusive uniform grid of `n` points over [lo, hi].
pub(crate) fn uniform_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n.max(1)).map(move |i| lo + step * i as f64)
}

/// Chebyshev interpolation coefficients of `f` using `m` nodes
/// (degrees 0..m-1).
fn chebyshev_fit(f: &dyn Fn(f64) -> f64, m: usize) -> Vec<f64> {
    let mut fx = Vec::with_capacity(m);
    for j in 0..m {
        let x = (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos();
        fx.push(f(x));
    }
    let mut coeffs = vec![0.0; m];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in fx.iter().enumerate() {
            acc += v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m as f64).cos();
        }
        *c = acc * if k == 0 { 1.0 } else { 2.0 } / m as f64;
    }
    coeffs
}

fn sup_error_on_grid(coeffs: &[f64], target: &dyn Fn(f64) -> f64, points: usize) -> f64 {
    let p = BoundedPolynomial {
        basis: String::new(),
        degree: coeffs.len() - 1,
        coeffs: coeffs.to_vec(),
        certified_sup_error: 0.0,
    };
    uniform_grid(-1.0, 1.0, points)
        .map(|x| (p.eval_unchecked(x) - target(x)).abs())
        .fold(0.0, f64::max)
}

/// Polynomial approximation of `erf(kappa (x - shift))` on [-1, 1] with
/// grid-certified error at most `eps` and |p| <= 1.
pub fn erf_poly(kappa: f64, shift: f64, eps: f64) -> Result<BoundedPolynomial> {
    erf_poly_with_cap(kappa, shift, eps, DEGREE_CAP)
}

/// As [`erf_poly`] with an explicit degree cap (the default cap is
/// [`DEGREE_CAP`]).
pub fn erf_poly_with_cap(
    kappa: f64,
    shift: f64,
    eps: f64,
    cap: usize,
) -> Result<BoundedPolynomial> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be >= 0, got {kappa}")));
    }
    if shift.abs() > 1.0 {
        return Err(Error::InvalidInput(format!("shift {shift} outside [-1, 1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    if kappa == 0.0 {
        return Ok(BoundedPolynomial::from_parts(vec![0.0], 0.0));
    }
    // Approximate the slightly shrunk target (1 - theta) erf(...) to tolerance
    // theta/2; the combined error stays below eps while the range bound
    // |p| <= 1 - theta/2 < 1 holds with margin.
    let theta = 2.0 * eps / 3.0;
    let tol = eps / 3.0;
    let target = move |x: f64| (1.0 - theta) * erf(kappa * (x - shift));

    // Predicted degree scale for the erf approximant.
    let log_term = (1.0 / tol).ln();
    let predicted = (log_term * (kappa * kappa + log_term)).sqrt();
    let mut m = ((2.0 * predicted) as usize + 32).min(2 * cap + 64);

    let coeffs = loop {
        let coeffs = chebyshev_fit(&target, m);
        // The fit is trustworthy once the tail of the expansion is tiny.
        let tail: f64 = coeffs[(m * 3) / 4..].iter().map(|c| c.abs()).sum();
        if tail < tol / 20.0 {
            break coeffs;
        }
        if m >= 2 * cap + 64 {
            return Err(Error::DegreeOverflow { cap });
        }
        m = (m * 2).min(2 * cap + 64);
    };

    // l1 tail bound gives a certified starting degree.
    let mut upper = coeffs.len() - 1;
    let mut tail = 0.0;
    let mut start = coeffs.len();
    for d in (0..coeffs.len()).rev() {
        tail += coeffs[d].abs();
        if tail > tol * 0.9 {
            start = d + 1;
            break;
        }
        start = d;
    }
    if start <= upper {
        upper = start.max(1);
    }
    if upper > cap {
        return Err(Error::DegreeOverflow { cap });
    }

    // Bisect for the smallest degree meeting the budget on a search grid,
    // then verify on the full certification grid.
    let search_points = 2001;
    let err_at = |d: usize| sup_error_on_grid(&coeffs[..=d], &target, search_points);
    let mut lo = 1usize;
    let mut hi = upper;
    if err_at(hi) > tol {
        // l1 bound was optimistic on this grid; walk upward.
        while hi < coeffs.len() - 1 && err_at(hi) > tol {
            hi += 1;
        }
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if err_at(mid) <= tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut degree = hi;
    let full_target = move |x: f64| erf(kappa * (x - shift));
    let mut certified;
    loop {
        certified = sup_error_on_grid(&coeffs[..=degree], &full_target, GRID_POINTS);
        if certified <= eps {
            break;
        }
        degree += 1;
        if degree > cap || degree >= coeffs.len() {
            return Err(Error::DegreeOverflow { cap });
        }
    }
    let p = BoundedPolynomial::from_parts(coeffs[..=degree].to_vec(), certified);
    debug_assert!(p.grid_max_abs() <= 1.0 + RANGE_SLACK);
    Ok(p)
}

/// Internal leakage split of the step construction: the erf tail accounts for
/// `2 * STEP_TAIL_SHARE * eta` and the polynomial error for
/// `2 * STEP_POLY_SHARE * eta`, so each step leaks at most
/// `(STEP_TAIL_SHARE + STEP_POLY_SHARE) * eta = 0.45 eta`. Keeping the sum
/// below 1/2 is what lets the window difference meet its own eta bound.
const STEP_TAIL_SHARE: f64 = 0.30;
const STEP_POLY_SHARE: f64 = 0.15;

/// Steepness used by the step construction for a given spec.
pub fn step_kappa(spec: &StepSpec) -> f64 {
    erf_inv(1.0 - 2.0 * STEP_TAIL_SHARE * spec.eta) / spec.delta
}

/// Step polynomial: at most `eta` below `mu - delta`, at least `1 - eta`
/// above `mu + delta`, realized as `(1 + p_erf(kappa (x - mu))) / 2`.
pub fn step_poly(spec: &StepSpec) -> Result<BoundedPolynomial> {
    spec.validate()?;
    let kappa = step_kappa(spec);
    let eps = 2.0 * STEP_POLY_SHARE * spec.eta;
    let p = erf_poly(kappa, spec.mu, eps)?;
    Ok(step_from_erf(&p))
}

/// Map an erf approximant `p` to the step form `(1 + p) / 2`.
pub fn step_from_erf(p: &BoundedPolynomial) -> BoundedPolynomial {
    let mut coeffs: Vec<f64> = p.coeffs().iter().map(|c| 0.5 * c).collect();
    coeffs[0] += 0.5;
    BoundedPolynomial::from_parts(coeffs, p.certified_sup_error() / 2.0)
}

/// Window polynomial: large on [-mu + delta, mu - delta], at most `eta`
/// outside [-mu - delta, mu + delta]. Constructed exactly as the coefficient
/// difference `step(-mu) - step(mu)`.
pub fn window_poly(spec: &StepSpec) -> Result<BoundedPolynomial> {
    spec.validate()?;
    if spec.mu <= spec.delta {
        return Err(Error::InvalidWindow { mu: spec.mu, delta: spec.delta });
    }
    let low = step_poly(&StepSpec { mu: -spec.mu, ..*spec })?;
    let high = step_poly(&StepSpec { mu: spec.mu, ..*spec })?;
    Ok(low.sub(&high))
}

/// Re-derive pass/fail for a step or window certificate from raw grid
/// evaluation only.
pub fn certify_bounds(p: &BoundedPolynomial, spec: &StepSpec, kind: BandKind) -> Certificate {
    let max_abs_on = |lo: f64, hi: f64| -> f64 {
        if hi < lo {
            return 0.0;
        }
        uniform_grid(lo, hi, GRID_POINTS)
            .map(|x| p.eval_unchecked(x).abs())
            .fold(0.0, f64::max)
    };
    let min_on = |lo: f64, hi: f64| -> f64 {
        if hi < lo {
            return f64::INFINITY;
        }
        uniform_grid(lo, hi, GRID_POINTS)
            .map(|x| p.eval_unchecked(x))
            .fold(f64::INFINITY, f64::min)
    };
    let (stop_max, pass_min) = match kind {
        BandKind::Step => (
            max_abs_on(-1.0, spec.mu - spec.delta),
            min_on(spec.mu + spec.delta, 1.0),
        ),
        BandKind::Window => (
            max_abs_on(-1.0, -spec.mu - spec.delta).max(max_abs_on(spec.mu + spec.delta, 1.0)),
            min_on(-spec.mu + spec.delta, spec.mu - spec.delta),
        ),
    };
    let stop_margin = spec.eta - stop_max;
    let pass_margin = pass_min - (1.0 - spec.eta);
    let range_ok = p.grid_max_abs() <= 1.0 + RANGE_SLACK;
    Certificate {
        pass: stop_margin >= 0.0 && pass_margin >= 0.0 && range_ok,
        stop_margin,
        pass_margin,
        range_ok,
    }
}

/// Quantized-steepness cache of erf bases `v -> erf(2 kappa_q v)` used by the
/// window-halving rounds, which shift a common base to arbitrary centers.
///
/// `kappa_q` is `kappa` rounded UP onto the lattice `2^(i/8)`, preserving the
/// halving guarantees while keeping the cache small.
pub fn shifted_erf_step(kappa: f64, center: f64, eps: f64) -> Result<(BoundedPolynomial, f64)> {
    assert!(kappa > 0.0 && center.abs() <= 1.0);
    let idx = (8.0 * kappa.log2()).ceil() as i32;
    let kappa_q = 2f64.powf(idx as f64 / 8.0);
    let base = cached_erf_base(idx, kappa_q, eps)?;
    // base(v) ~ erf(2 kappa_q v); substitute v = (x - center)/2.
    let shifted = base.compose_affine(0.5, -center / 2.0)?;
    Ok((step_from_erf(&shifted), kappa_q))
}

fn cached_erf_base(idx: i32, kappa_q: f64, eps: f64) -> Result<Arc<BoundedPolynomial>> {
    static CACHE: OnceLock<Mutex<HashMap<(i32, u64), Arc<BoundedPolynomial>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (idx, eps.to_bits());
    if let Some(p) = cache.lock().expect("erf base cache poisoned").get(&key) {
        return Ok(p.clone());
    }
    let p = Arc::new(erf_poly(2.0 * kappa_q, 0.0, eps)?);
    cache
        .lock()
        .expect("erf base cache poisoned")
        .insert(key, p.clone());
    Ok(p)
}
