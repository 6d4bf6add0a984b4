//! Error function and standard normal CDF.
//!
//! `erf` uses its Taylor-type series `2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!`
//! (all terms positive, so no cancellation) below `|x| = 2.5`; `erfc` uses
//! the Laplace continued fraction above it. Both are good to a few ulps.

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SERIES_LIMIT: f64 = 2.5;

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x >= SERIES_LIMIT`:
/// `e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_fraction(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=120).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs();
    let v = if a < SERIES_LIMIT {
        erf_series(a)
    } else {
        1.0 - erfc_fraction(a)
    };
    v.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= SERIES_LIMIT {
        erfc_fraction(x)
    } else if x > -SERIES_LIMIT {
        if x >= 0.0 {
            1.0 - erf_series(x)
        } else {
            1.0 + erf_series(-x)
        }
    } else {
        2.0 - erfc_fraction(-x)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
