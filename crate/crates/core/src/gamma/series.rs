use serde::{Deserialize, Serialize};

use super::{GammaError, GammaParams};
use crate::special::{digamma, ln_gamma};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 100_000,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err("rel_tol must lie in (0, 1)".into());
        }
        if self.max_terms == 0 {
            return Err("max_terms must be >= 1".into());
        }
        Ok(())
    }
}

const RESCALE_ABOVE: f64 = 1e250;

/// Log-density at `y` of the sum of independent Gamma variables.
///
/// The sum is written as a mixture of Gamma(rho + m, theta_min) densities,
/// rho being the total shape, with mixture weights `C * delta_m` that are
/// non-negative and sum to one. The weights follow
///
/// ```text
/// S_j(m+1)   = r_j (delta_m + S_j(m)),      r_j = 1 - theta_min / theta_j
/// delta_m+1  = sum_j k_j S_j(m+1) / (m+1)
/// ```
///
/// which equals the usual convolution recursion on
/// `gamma_i = sum_j k_j r_j^i / i` but costs O(n) per term and involves
/// only non-negative quantities. Summation stops once the unvisited weight
/// mass times the largest remaining component density is below
/// `rel_tol` of the sum.
pub fn sum_gamma_log_density(y: f64, params: &[GammaParams], cfg: &SeriesConfig) -> Result<f64, GammaError> {
    if params.is_empty() {
        return Err(GammaError::NoComponents);
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(GammaError::NonPositive(y));
    }
    for p in params {
        GammaParams::new(p.k, p.theta)?;
    }
    let theta1 = params.iter().map(|p| p.theta).fold(f64::INFINITY, f64::min);
    let ln_theta1 = theta1.ln();
    let rho: f64 = params.iter().map(|p| p.k).sum();
    let ln_c: f64 = params.iter().map(|p| p.k * (ln_theta1 - p.theta.ln())).sum();
    let (ks, rs): (Vec<f64>, Vec<f64>) = params
        .iter()
        .filter(|p| p.theta > theta1)
        .map(|p| (p.k, 1.0 - theta1 / p.theta))
        .unzip();

    let ln_y = y.ln();
    let y_scaled = y / theta1;
    let component = |m: f64| (rho + m - 1.0) * ln_y - y_scaled - ln_gamma(rho + m) - (rho + m) * ln_theta1;
    // Component densities are unimodal in m with the peak where
    // digamma(rho + m) = ln(y / theta1).
    let peak = if y_scaled > 1.0 {
        let guess = (y_scaled + 0.5 - rho).max(0.0);
        let d = digamma(rho + guess) - y_scaled.ln();
        (guess - d * (rho + guess)).max(0.0)
    } else {
        0.0
    };

    let mut s = vec![0.0; ks.len()];
    let mut delta = 1.0f64;
    let mut ln_scale = 0.0f64;
    let mut mass = Neumaier::default();
    let mut ln_sum = f64::NEG_INFINITY;
    for m in 0..cfg.max_terms {
        let mf = m as f64;
        let ln_weight = ln_c + ln_scale + delta.ln();
        let ln_term = ln_weight + component(mf);
        ln_sum = log_add(ln_sum, ln_term);
        mass.add(ln_weight.exp());

        let next = mf + 1.0;
        let ln_tail_density = if next >= peak {
            component(next)
        } else {
            let j = peak.floor();
            [j - 1.0, j, j + 1.0, j + 2.0]
                .iter()
                .filter(|&&c| c >= next)
                .map(|&c| component(c))
                .fold(component(next), f64::max)
        };
        let rounding = (mf + 1.0) * f64::EPSILON;
        let unvisited = (1.0 - mass.total()).max(0.0);
        let ln_bound = (unvisited + rounding).ln() + ln_tail_density;
        let ln_target = cfg.rel_tol.ln() + ln_sum;
        if ks.is_empty() || ln_bound <= ln_target {
            return Ok(ln_sum);
        }
        // Past the component peak with the remaining mass below rounding
        // level, the terms themselves are the only meaningful check.
        if next >= peak && unvisited <= rounding && ln_term <= ln_target {
            return Ok(ln_sum);
        }

        let mut acc = 0.0;
        for ((sj, &rj), &kj) in s.iter_mut().zip(&rs).zip(&ks) {
            *sj = rj * (delta + *sj);
            acc += kj * *sj;
        }
        delta = acc / next;
        if delta > RESCALE_ABOVE {
            delta /= RESCALE_ABOVE;
            for sj in &mut s {
                *sj /= RESCALE_ABOVE;
            }
            ln_scale += RESCALE_ABOVE.ln();
        }
        if delta == 0.0 {
            return Ok(ln_sum);
        }
    }
    Err(GammaError::SeriesDiverged {
        partial_log_sum: ln_sum,
        terms: cfg.max_terms,
    })
}

/// Density at 1 of the sum of independent Gammas.
pub fn kappa(params: &[GammaParams], cfg: &SeriesConfig) -> Result<f64, GammaError> {
    sum_gamma_log_density(1.0, params, cfg).map(f64::exp)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Compensated summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
