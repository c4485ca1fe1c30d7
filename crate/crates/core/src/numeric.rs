//! Scalar helpers: Gaussian tail function and stable log-domain arithmetic.

use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gaussian tail probability `Q(x) = P[N(0,1) > x]`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of [`q_func`] on `(0, 1)`.
pub fn q_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let x = SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step on Q(x) = p sharpens the deep tails
    let f = q_func(x) - p;
    let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if dens > 0.0 && f.is_finite() {
        x + f / dens
    } else {
        x
    }
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    q_func(-x)
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when the difference vanishes.
#[inline]
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Two-sided normal quantile for a confidence level, e.g. 0.99 -> 2.5758.
pub fn z_for_confidence(level: f64) -> f64 {
    q_inv((1.0 - level) / 2.0)
}

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if k == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}
