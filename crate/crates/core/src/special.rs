//! Standard normal CDF helpers that stay accurate far in the lower tail.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const CF_SWITCH: f64 = 10.0;
const CF_DEPTH: usize = 60;
const LOWER_TAIL: f64 = -5.0;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < CF_SWITCH {
        return (x * x).exp() * libm::erfc(x);
    }
    // Laplace continued fraction, evaluated bottom-up.
    let mut acc = x;
    for k in (1..=CF_DEPTH).rev() {
        acc = x + (k as f64 / 2.0) / acc;
    }
    1.0 / (PI.sqrt() * acc)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `log Φ(x)`.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < LOWER_TAIL {
        -0.5 * x * x + (0.5 * erfcx(-x * FRAC_1_SQRT_2)).ln()
    } else if x > 0.0 {
        (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Inverse Mills ratio `φ(x)/Φ(x)`.
pub fn inv_mills(x: f64) -> f64 {
    if x < LOWER_TAIL {
        (2.0 / PI).sqrt() / erfcx(-x * FRAC_1_SQRT_2)
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

/// `R(x)(R(x) + x)` with `R` the inverse Mills ratio; lies in (0, 1).
pub fn inv_mills_slope(x: f64) -> f64 {
    let r = inv_mills(x);
    r * (r + x)
}
