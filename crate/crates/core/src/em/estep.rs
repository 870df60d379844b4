use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;

use super::{EmConfig, ModelState, WeightedSample};
use crate::gamma::{gamma_log_pdf_unchecked, ConditionalSampler, GammaError, GammaParams};
use crate::network::Observation;
use crate::prior::PriorTable;
use crate::seed::rng_for;

/// Identifies the random streams of one E-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSeed {
    pub seed: u64,
    pub time: f64,
    pub iteration: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EStepOutput {
    /// Samples grouped by observation, then by draw, then in path order.
    pub samples: Vec<WeightedSample>,
    /// For each processed observation: its range in `samples` and its
    /// decay weight.
    pub spans: Vec<(Range<usize>, f64)>,
    pub skipped: usize,
}

/// Draw `num_samples` allocations of each observation's duration over its
/// links and weight them.
///
/// Each observation uses its own generator derived from the step seed and
/// its id, so results do not depend on ordering or on parallelism. Links
/// without parameters in `state` are sampled under their prior. The weights
/// of one observation's draws sum to its decay weight.
pub fn e_step(
    observations: &[(Observation, f64)],
    state: &ModelState,
    prior: &PriorTable,
    cfg: &EmConfig,
    seed: StepSeed,
) -> EStepOutput {
    let per_obs: Vec<Result<Vec<WeightedSample>, GammaError>> = observations
        .par_iter()
        .map(|(obs, w)| sample_observation(obs, *w, state, prior, cfg, seed))
        .collect();
    let mut out = EStepOutput::default();
    for (res, (_, w)) in per_obs.into_iter().zip(observations) {
        match res {
            Ok(samples) if !samples.is_empty() => {
                let start = out.samples.len();
                out.samples.extend(samples);
                out.spans.push((start..out.samples.len(), *w));
            }
            _ => out.skipped += 1,
        }
    }
    out
}

fn sample_observation(
    obs: &Observation,
    decay: f64,
    state: &ModelState,
    prior: &PriorTable,
    cfg: &EmConfig,
    seed: StepSeed,
) -> Result<Vec<WeightedSample>, GammaError> {
    let u = cfg.num_samples;
    if obs.weights.is_empty() || u == 0 {
        return Ok(Vec::new());
    }
    let alpha: Vec<f64> = obs.weights.iter().map(|w| w.1).collect();
    let params: Vec<GammaParams> = obs
        .weights
        .iter()
        .map(|&(l, _)| state.get(l).unwrap_or_else(|| prior.gamma(l)))
        .collect();
    let sampler = ConditionalSampler::new(&alpha, obs.duration_s, &params)?;
    let mut rng = rng_for(seed.seed, &[&seed.time, &seed.iteration, &&*obs.id, &obs.time]);

    let mut draws = Vec::with_capacity(u);
    let mut log_w = Vec::with_capacity(u);
    for _ in 0..u {
        let d = sampler.draw(&mut rng)?;
        let lw = if alpha.len() == 1 {
            0.0
        } else if cfg.paper_faithful_sampling {
            d.z.iter().zip(&params).map(|(&z, &p)| gamma_log_pdf_unchecked(z, p)).sum()
        } else {
            d.log_ratio
        };
        log_w.push(lw);
        draws.push(d.z);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(GammaError::SamplingFailed(u));
    }
    let scaled: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = scaled.iter().sum();

    let mut out = Vec::with_capacity(u * alpha.len());
    for (i, (z, s)) in draws.into_iter().zip(scaled).enumerate() {
        let weight = decay * s / total;
        for (&(link, _), value_s) in obs.weights.iter().zip(z) {
            out.push(WeightedSample {
                link,
                value_s,
                weight,
                observation_id: obs.id.clone(),
                draw: i as u32,
            });
        }
    }
    Ok(out)
}

/// Regroup samples by link.
pub fn shuffle(samples: Vec<WeightedSample>) -> BTreeMap<usize, Vec<WeightedSample>> {
    let mut groups: BTreeMap<usize, Vec<WeightedSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.link).or_default().push(s);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::network::{Link, RoadNetwork};
    use crate::prior::PriorConfig;

    fn setup(n: usize) -> (PriorTable, ModelState) {
        let links = (0..n)
            .map(|i| Link {
                id: format!("l{i}"),
                from_node: "a".into(),
                to_node: "b".into(),
                length_m: 500.0,
                speed_limit_mps: 10.0,
            })
            .collect();
        let net = RoadNetwork::new(links).unwrap();
        (PriorTable::new(&net, &PriorConfig::default()), ModelState::new(0.0))
    }

    fn obs(id: &str, weights: Vec<(usize, f64)>, d: f64) -> Observation {
        Observation {
            id: Arc::from(id),
            weights,
            duration_s: d,
            time: 0.0,
        }
    }

    fn seed() -> StepSeed {
        StepSeed {
            seed: 5,
            time: 0.0,
            iteration: 0,
        }
    }

    #[test]
    fn single_link_allocation_is_fixed() {
        let (prior, state) = setup(1);
        let cfg = EmConfig {
            num_samples: 10,
            ..EmConfig::default()
        };
        let out = e_step(&[(obs("a", vec![(0, 1.0)], 42.0), 0.5)], &state, &prior, &cfg, seed());
        assert_eq!(out.samples.len(), 10);
        assert!(out.samples.iter().all(|s| s.value_s == 42.0));
        let total: f64 = out.samples.iter().map(|s| s.weight).sum();
        assert!((total - 0.5).abs() < 1e-15);
        assert_eq!(out.spans, vec![(0..10, 0.5)]);
    }

    #[test]
    fn weights_normalize_per_observation() {
        let (prior, state) = setup(3);
        let cfg = EmConfig {
            num_samples: 25,
            ..EmConfig::default()
        };
        let data = vec![
            (obs("a", vec![(0, 0.3), (1, 1.0), (2, 0.6)], 90.0), 0.8),
            (obs("b", vec![(1, 0.5), (2, 1.0)], 40.0), 1.0),
        ];
        for uncorrected in [false, true] {
            let cfg = EmConfig {
                paper_faithful_sampling: uncorrected,
                ..cfg.clone()
            };
            let out = e_step(&data, &state, &prior, &cfg, seed());
            assert_eq!(out.spans.len(), 2);
            for ((range, w), (o, _)) in out.spans.iter().zip(&data) {
                let draws = &out.samples[range.clone()];
                assert_eq!(draws.len(), 25 * o.weights.len());
                // Each draw's link values satisfy the hyperplane constraint
                // and share one weight, counted once per draw.
                let mut total = 0.0;
                for chunk in draws.chunks(o.weights.len()) {
                    let sum: f64 = chunk.iter().zip(&o.weights).map(|(s, (_, a))| s.value_s * a).sum();
                    assert!((sum - o.duration_s).abs() <= 1e-9 * o.duration_s);
                    total += chunk[0].weight;
                }
                assert!((total - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shuffle_partitions_by_link() {
        let s = |link| WeightedSample {
            link,
            value_s: 1.0,
            weight: 1.0,
            observation_id: Arc::from("x"),
            draw: 0,
        };
        assert!(shuffle(Vec::new()).is_empty());
        let g = shuffle(vec![s(3), s(7), s(3)]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[&3].len(), 2);
        assert_eq!(g[&7].len(), 1);
    }
}
