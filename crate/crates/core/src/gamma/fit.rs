use super::{GammaError, GammaParams};
use crate::special::{ln_minus_digamma, trigamma};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const SHAPE_BRACKET: (f64, f64) = (1e-8, 1e8);

/// Kish effective sample size `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), &w| (s + w, s2 + w * w));
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Maximize `sum_i w_i log f(x_i; k, theta)` over Gamma parameters.
///
/// The shape solves `ln k - digamma(k) = ln(mean) - mean(ln x)` by Newton
/// iteration from the moment estimate, falling back to bisection when a step
/// leaves the positive axis; the scale is then `mean / k`.
pub fn fit_gamma_weighted(samples: &[f64], weights: &[f64]) -> Result<GammaParams, GammaError> {
    if samples.len() != weights.len() {
        return Err(GammaError::DimensionMismatch(format!("{} samples, {} weights", samples.len(), weights.len())));
    }
    let mut total = 0.0;
    let mut sum = 0.0;
    let mut used = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &w) in samples.iter().zip(weights) {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(GammaError::InvalidWeight(w));
        }
        if !(x > 0.0 && x.is_finite()) {
            return Err(GammaError::NonPositive(x));
        }
        if w > 0.0 {
            used += 1;
            total += w;
            sum += w * x;
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if used < 2 {
        return Err(GammaError::TooFewSamples(used));
    }
    if lo == hi {
        return Err(GammaError::DegenerateSamples);
    }
    let mean = sum / total;
    let mut var = 0.0;
    let mut gap = 0.0;
    for (&x, &w) in samples.iter().zip(weights) {
        if w > 0.0 {
            let r = (x - mean) / mean;
            var += w * (x - mean) * (x - mean);
            // ln(mean) - ln(x); the ln_1p form keeps precision near the
            // mean but would lose samples far below it.
            gap += w * if r.abs() < 0.5 { -r.ln_1p() } else { mean.ln() - x.ln() };
        }
    }
    var /= total;
    gap /= total;
    if !(var > 0.0 && gap > 0.0) {
        return Err(GammaError::DegenerateSamples);
    }
    let k = solve_shape(gap, mean * mean / var);
    GammaParams::new(k, mean / k)
}

fn solve_shape(gap: f64, start: f64) -> f64 {
    let f = |k: f64| ln_minus_digamma(k) - gap;
    let mut k = start.clamp(SHAPE_BRACKET.0, SHAPE_BRACKET.1);
    for _ in 0..NEWTON_MAX_ITER {
        let step = f(k) / (1.0 / k - trigamma(k));
        let next = k - step;
        if !(next > 0.0 && next.is_finite()) {
            return bisect(f);
        }
        if (next - k).abs() <= NEWTON_TOL * next {
            return next;
        }
        k = next;
    }
    bisect(f)
}

/// `f` is decreasing in k; root on the log scale of the bracket.
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (SHAPE_BRACKET.0.ln(), SHAPE_BRACKET.1.ln());
    if f(lo.exp()) <= 0.0 {
        return SHAPE_BRACKET.0;
    }
    if f(hi.exp()) >= 0.0 {
        return SHAPE_BRACKET.1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}
