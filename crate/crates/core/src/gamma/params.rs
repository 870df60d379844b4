use serde::{Deserialize, Serialize};

use super::GammaError;
use crate::special::ln_gamma;

/// Shape/scale parameters of a Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub k: f64,
    pub theta: f64,
}

impl GammaParams {
    pub fn new(k: f64, theta: f64) -> Result<Self, GammaError> {
        if k.is_finite() && theta.is_finite() && k > 0.0 && theta > 0.0 {
            Ok(Self { k, theta })
        } else {
            Err(GammaError::InvalidParams { k, theta })
        }
    }

    /// Parameters with the given mean and standard deviation.
    pub fn from_moments(mean: f64, stddev: f64) -> Result<Self, GammaError> {
        Self::new((mean / stddev).powi(2), stddev * stddev / mean)
    }

    pub fn mean(&self) -> f64 {
        self.k * self.theta
    }

    pub fn variance(&self) -> f64 {
        self.k * self.theta * self.theta
    }

    pub fn stddev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Parameters of `c * X`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            theta: self.theta * c,
        }
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.k + self.theta.ln() + ln_gamma(self.k) + (1.0 - self.k) * crate::special::digamma(self.k)
    }
}

/// Log-density of Gamma(k, theta) at `x > 0`.
pub fn gamma_log_pdf(x: f64, p: GammaParams) -> Result<f64, GammaError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(GammaError::NonPositive(x));
    }
    Ok(gamma_log_pdf_unchecked(x, p))
}

#[inline]
pub(crate) fn gamma_log_pdf_unchecked(x: f64, p: GammaParams) -> f64 {
    -ln_gamma(p.k) - p.k * p.theta.ln() + (p.k - 1.0) * x.ln() - x / p.theta
}
