//! Online EM over decay-weighted observation windows.

mod estep;
mod mstep;
mod online;
mod state;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::{GammaError, SeriesConfig};

pub use estep::{e_step, shuffle, EStepOutput, StepSeed};
pub use mstep::{m_step, MStepStats};
pub use online::{em_iterate, EmDiagnostics, IterationDiagnostics, OnlineEstimator, StepReport};
pub use state::{path_log_likelihood, LinkEstimate, ModelState, WeightedSample};
pub use window::{assemble_window, HistoricalSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("no parameters for link {0}")]
    MissingLink(usize),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    /// Samples drawn per observation in each E-step.
    pub num_samples: usize,
    pub num_iterations: usize,
    pub weeks_lookback: u32,
    pub day_window_s: f64,
    pub time_step_s: f64,
    /// Total weight of the prior pseudo-samples added to every fit.
    pub prior_strength: f64,
    /// Fits with a smaller Kish effective sample size are refused.
    pub min_effective_samples: f64,
    /// Window observations weighted below this are dropped.
    pub weight_floor: f64,
    /// Weight draws by their joint Gamma likelihood instead of the
    /// importance ratio against the conditional density.
    pub paper_faithful_sampling: bool,
    pub series: SeriesConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            num_samples: 100,
            num_iterations: 5,
            weeks_lookback: 10,
            day_window_s: 7200.0,
            time_step_s: 1200.0,
            prior_strength: 1.0,
            min_effective_samples: 3.0,
            weight_floor: 1e-3,
            paper_faithful_sampling: false,
            series: SeriesConfig::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        check((10..=100).contains(&self.num_samples), "num_samples must lie in [10, 100]")?;
        check((1..=5).contains(&self.num_iterations), "num_iterations must lie in [1, 5]")?;
        check((1..=10).contains(&self.weeks_lookback), "weeks_lookback must lie in [1, 10]")?;
        check(
            (1200.0..=7200.0).contains(&self.day_window_s),
            "day_window_s must lie in [1200, 7200]",
        )?;
        check((5.0..=3600.0).contains(&self.time_step_s), "time_step_s must lie in [5, 3600]")?;
        check(
            self.prior_strength > 0.0 && self.prior_strength.is_finite(),
            "prior_strength must be positive",
        )?;
        check(self.min_effective_samples >= 0.0, "min_effective_samples must be non-negative")?;
        check(
            (0.0..1.0).contains(&self.weight_floor),
            "weight_floor must lie in [0, 1)",
        )?;
        self.series.validate().map_err(|e| format!("series.{e}"))
    }
}
