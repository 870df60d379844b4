use super::EmConfig;
use crate::decay::{decay_weight, DecayConfig, SECONDS_PER_WEEK};
use crate::network::Observation;

/// Previously ingested observations, queried by time range.
pub trait HistoricalSource {
    /// Observations with `from <= time <= to`.
    fn observations_between(&self, from: f64, to: f64) -> Vec<Observation>;

    fn append(&mut self, batch: Vec<Observation>) -> Result<(), crate::io::IoError>;
}

/// Observations contributing to the estimate at `t_current`, with weights.
///
/// The window is the last `day_window_s` of the current day, drawn from the
/// history and `current`, plus for each of `weeks_lookback` past weeks the
/// history within `day_window_s` of the same time of day. Weights come from
/// [`decay_weight`]; those below `cfg.weight_floor` are dropped.
pub fn assemble_window(
    current: &[Observation],
    history: &dyn HistoricalSource,
    t_current: f64,
    cfg: &EmConfig,
    decay: &DecayConfig,
) -> Vec<(Observation, f64)> {
    let span = cfg.day_window_s;
    let mut picked: Vec<Observation> = Vec::new();
    for w in (1..=cfg.weeks_lookback).rev() {
        let centre = t_current - f64::from(w) * SECONDS_PER_WEEK;
        picked.extend(history.observations_between(centre - span, centre + span));
    }
    picked.extend(history.observations_between(t_current - span, t_current));
    picked.extend(
        current
            .iter()
            .filter(|o| o.time >= t_current - span && o.time <= t_current)
            .cloned(),
    );
    picked
        .into_iter()
        .filter_map(|o| {
            let w = decay_weight(o.time, t_current, decay).ok()?;
            (w >= cfg.weight_floor).then_some((o, w))
        })
        .collect()
}
