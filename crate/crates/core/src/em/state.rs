use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EmError, IterationDiagnostics};
use crate::gamma::{sum_gamma_log_density, GammaParams, SeriesConfig};
use crate::network::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    pub params: GammaParams,
    /// Total data weight behind the fit, prior pseudo-samples excluded.
    pub n_effective: f64,
}

/// Per-link parameters at one time index.
///
/// Entries are shared between successive states; an M-step replaces only
/// the entries it refits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelState {
    pub time_index: f64,
    pub params: BTreeMap<usize, Arc<LinkEstimate>>,
    pub diagnostics: Option<IterationDiagnostics>,
    /// EM iterations applied since the initial state.
    pub iterations: u64,
}

impl ModelState {
    pub fn new(time_index: f64) -> Self {
        Self {
            time_index,
            ..Self::default()
        }
    }

    pub fn get(&self, link: usize) -> Option<GammaParams> {
        self.params.get(&link).map(|e| e.params)
    }

    pub fn insert(&mut self, link: usize, params: GammaParams, n_effective: f64) {
        self.params.insert(link, Arc::new(LinkEstimate { params, n_effective }));
    }
}

/// One link's share of one E-step draw.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub link: usize,
    pub value_s: f64,
    pub weight: f64,
    pub observation_id: Arc<str>,
    /// Index of the draw within its observation.
    pub draw: u32,
}

/// Log-density of the observed duration: `d` is the sum of independent
/// `alpha_l X_l` with `X_l` distributed by the state's parameters.
pub fn path_log_likelihood(obs: &Observation, state: &ModelState, cfg: &SeriesConfig) -> Result<f64, EmError> {
    let params = obs
        .weights
        .iter()
        .map(|&(l, a)| state.get(l).map(|p| p.scaled(a)).ok_or(EmError::MissingLink(l)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sum_gamma_log_density(obs.duration_s, &params, cfg)?)
}
