//! Special-function helpers shared by the polynomial constructions.

/// Error function.
pub fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// Inverse error function: rational initial guess refined with Newton steps
/// until the residual `|erf(x) - y|` drops below 1e-12.
pub fn erf_inv(y: f64) -> f64 {
    assert!(y.abs() < 1.0, "erf_inv domain is (-1, 1), got {y}");
    let mut x = statrs::function::erf::erf_inv(y);
    if !x.is_finite() {
        x = 0.0;
    }
    const SQRT_PI_OVER_2: f64 = 0.886_226_925_452_758_0;
    for _ in 0..20 {
        let r = erf(x) - y;
        if r.abs() <= 1e-12 {
            break;
        }
        // d/dx erf = 2/sqrt(pi) * exp(-x^2)
        x -= r * SQRT_PI_OVER_2 * (x * x).exp();
    }
    x
}

/// Series oracle for erf, independent of the statrs implementation:
/// Maclaurin series for small |x|, continued-fraction erfc for large |x|.
/// Test-only; lives here so other modules' tests can borrow it.
#[cfg(test)]
pub(crate) fn tests_oracle_erf(x: f64) -> f64 {
    if x < 0.0 {
        return -tests_oracle_erf(-x);
    }
    if x <= 4.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= -x * x / k as f64;
            let add = term / (2 * k + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-6) {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz-style continued fraction for erfc at large x.
        let x2 = 2.0 * x * x;
        let mut f = 0.0;
        for k in (1..=60).rev() {
            let a = k as f64;
            f = if k % 2 == 1 { a / (x2 + f) } else { a / (1.0 + f) };
        }
        let erfc = (-x * x).exp() / (x * std::f64::consts::PI.sqrt()) / (1.0 + f);
        1.0 - erfc
    }
}
