use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    assemble_window, e_step, m_step, path_log_likelihood, shuffle, EStepOutput, EmConfig, HistoricalSource,
    ModelState, StepSeed,
};
use crate::decay::DecayConfig;
use crate::gamma::gamma_log_pdf_unchecked;
use crate::io::IoError;
use crate::network::Observation;
use crate::prior::PriorTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: u32,
    /// Expected complete-data log-likelihood: weighted E-step samples
    /// scored under the parameters fitted to them.
    pub q: f64,
    /// Monte Carlo standard error of `q`.
    pub q_se: f64,
    /// Decay-weighted log-density of the observed durations under the
    /// fitted parameters.
    pub log_likelihood: f64,
    pub observations: usize,
    pub skipped: usize,
    pub samples: usize,
    pub links_fitted: usize,
    pub fits_refused: usize,
    pub fits_failed: usize,
    pub likelihood_failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmDiagnostics {
    pub iterations: Vec<IterationDiagnostics>,
}

impl EmDiagnostics {
    /// `q` of the last iteration, 0 when nothing ran.
    pub fn final_q(&self) -> f64 {
        self.iterations.last().map_or(0.0, |d| d.q)
    }
}

/// Run `cfg.num_iterations` rounds of E-step, shuffle and M-step starting
/// from `state`, producing the state for `time`.
///
/// Links observed for the first time start from their prior.
pub fn em_iterate(
    observations: &[(Observation, f64)],
    state: &ModelState,
    prior: &PriorTable,
    cfg: &EmConfig,
    seed: u64,
    time: f64,
) -> (ModelState, EmDiagnostics) {
    let mut current = state.clone();
    current.time_index = time;
    let mut diagnostics = EmDiagnostics::default();
    if observations.is_empty() {
        return (current, diagnostics);
    }
    for (obs, _) in observations {
        for link in obs.links() {
            if !current.params.contains_key(&link) {
                current.insert(link, prior.gamma(link), 0.0);
            }
        }
    }
    for iteration in 0..cfg.num_iterations as u32 {
        let step_seed = StepSeed { seed, time, iteration };
        let drawn = e_step(observations, &current, prior, cfg, step_seed);
        let grouped = shuffle(drawn.samples.clone());
        let (next, stats) = m_step(&grouped, &current, prior, cfg);
        let (q, q_se) = expected_complete_log_likelihood(&drawn, &next);
        let (log_likelihood, likelihood_failures) = observed_log_likelihood(observations, &next, cfg);
        let diag = IterationDiagnostics {
            iteration,
            q,
            q_se,
            log_likelihood,
            observations: drawn.spans.len(),
            skipped: drawn.skipped,
            samples: drawn.samples.len(),
            links_fitted: stats.fitted,
            fits_refused: stats.refused,
            fits_failed: stats.failed,
            likelihood_failures,
        };
        current = next;
        current.diagnostics = Some(diag);
        diagnostics.iterations.push(diag);
    }
    (current, diagnostics)
}

/// Sum over observations of the decay weight times the self-normalized
/// average of each draw's joint log-density, with a delta-method standard
/// error.
fn expected_complete_log_likelihood(drawn: &EStepOutput, state: &ModelState) -> (f64, f64) {
    let per_obs: Vec<(f64, f64)> = drawn
        .spans
        .par_iter()
        .map(|(range, decay)| {
            let samples = &drawn.samples[range.clone()];
            // (normalized weight, joint log-density) per draw.
            let mut draws: Vec<(f64, f64)> = Vec::new();
            for s in samples {
                let ll = state.get(s.link).map_or(f64::NAN, |p| gamma_log_pdf_unchecked(s.value_s, p));
                match draws.get_mut(s.draw as usize) {
                    Some(d) => d.1 += ll,
                    None => draws.push((s.weight / decay, ll)),
                }
            }
            let mean: f64 = draws.iter().map(|(w, c)| w * c).sum();
            let var: f64 = draws.iter().map(|(w, c)| w * w * (c - mean) * (c - mean)).sum();
            (decay * mean, decay * decay * var)
        })
        .collect();
    let (q, var) = per_obs.iter().fold((0.0, 0.0), |(q, v), (a, b)| (q + a, v + b));
    (q, var.sqrt())
}

fn observed_log_likelihood(observations: &[(Observation, f64)], state: &ModelState, cfg: &EmConfig) -> (f64, usize) {
    let terms: Vec<Option<f64>> = observations
        .par_iter()
        .map(|(obs, w)| path_log_likelihood(obs, state, &cfg.series).ok().map(|ll| w * ll))
        .collect();
    terms.iter().fold((0.0, 0), |(sum, failed), t| match t {
        Some(v) => (sum + v, failed),
        None => (sum, failed + 1),
    })
}

/// Result of one [`OnlineEstimator::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub window_size: usize,
    pub diagnostics: EmDiagnostics,
}

/// Warm-started EM over a sequence of time steps, keeping the history of
/// ingested observations.
pub struct OnlineEstimator<H> {
    pub state: ModelState,
    pub history: H,
    pub prior: PriorTable,
    pub em: EmConfig,
    pub decay: DecayConfig,
    pub seed: u64,
}

impl<H: HistoricalSource> OnlineEstimator<H> {
    /// Estimate for `time` from `batch` (observations of the step ending at
    /// `time`) together with the decay-weighted history, then add the batch
    /// to the history. The batch is put in (time, id) order first, so the
    /// result does not depend on how it was assembled.
    pub fn step(&mut self, mut batch: Vec<Observation>, time: f64) -> Result<StepReport, IoError> {
        batch.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.id.cmp(&b.id)));
        let window = assemble_window(&batch, &self.history, time, &self.em, &self.decay);
        let (state, diagnostics) = em_iterate(&window, &self.state, &self.prior, &self.em, self.seed, time);
        self.state = state;
        self.history.append(batch)?;
        Ok(StepReport {
            time,
            window_size: window.len(),
            diagnostics,
        })
    }
}
