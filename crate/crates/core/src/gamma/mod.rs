//! Gamma densities, the density of a sum of independent Gammas, the
//! conditional law on a hyperplane and weighted maximum-likelihood fits.

mod fit;
mod params;
mod series;
mod simplex;

use thiserror::Error;

pub use fit::{effective_sample_size, fit_gamma_weighted};
pub use params::{gamma_log_pdf, GammaParams};
pub use series::{kappa, sum_gamma_log_density, SeriesConfig};
pub use simplex::{conditional_log_density, sample_conditional, ConditionalDraw, ConditionalSampler, SimplexPoint, SAMPLE_RETRIES};

pub(crate) use params::gamma_log_pdf_unchecked;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GammaError {
    #[error("invalid gamma parameters k={k}, theta={theta}")]
    InvalidParams { k: f64, theta: f64 },
    #[error("argument must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("at least one component is required")]
    NoComponents,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("a one-dimensional simplex is a single point")]
    DegenerateSupport,
    #[error("point is off the hyperplane: residual {residual} for d={d}")]
    OffHyperplane { residual: f64, d: f64 },
    #[error("series did not converge after {terms} terms (partial log-sum {partial_log_sum})")]
    SeriesDiverged { partial_log_sum: f64, terms: usize },
    #[error("sampler produced no usable draw after {0} attempts")]
    SamplingFailed(usize),
    #[error("degenerate sample set")]
    DegenerateSamples,
    #[error("need at least 2 samples with positive weight, got {0}")]
    TooFewSamples(usize),
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
}
