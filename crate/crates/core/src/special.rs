//! Log-gamma, digamma and trigamma.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Below this the recurrences shift the argument up before using the
/// asymptotic expansions.
const ASYMPTOTIC_FROM: f64 = 10.0;

/// First derivative of digamma, for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_FROM {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    // 1/z + 1/2z^2 + sum B_2n / z^(2n+1)
    let tail = r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0))));
    acc + r + 0.5 * r2 + r * tail
}

/// `ln(x) - digamma(x)` for `x > 0`, without the cancellation the direct
/// difference suffers for large `x`.
pub fn ln_minus_digamma(x: f64) -> f64 {
    if x < ASYMPTOTIC_FROM {
        return x.ln() - digamma(x);
    }
    let r = 1.0 / x;
    let r2 = r * r;
    0.5 * r + r2 * (1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 / 132.0))))
}
