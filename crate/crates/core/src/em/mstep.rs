use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EmConfig, LinkEstimate, ModelState, WeightedSample};
use crate::gamma::{effective_sample_size, fit_gamma_weighted};
use crate::prior::PriorTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MStepStats {
    pub fitted: usize,
    /// Links whose samples had too small an effective sample size.
    pub refused: usize,
    pub failed: usize,
}

enum Outcome {
    Fitted(LinkEstimate),
    Refused,
    Failed,
}

/// Refit every link present in `grouped` to its samples plus the prior
/// pseudo-samples. Links that are refused or fail keep their previous
/// parameters, or get their prior if they had none; links absent from
/// `grouped` are untouched.
pub fn m_step(
    grouped: &BTreeMap<usize, Vec<WeightedSample>>,
    state: &ModelState,
    prior: &PriorTable,
    cfg: &EmConfig,
) -> (ModelState, MStepStats) {
    let groups: Vec<(&usize, &Vec<WeightedSample>)> = grouped.iter().collect();
    let outcomes: Vec<(usize, f64, Outcome)> = groups
        .par_iter()
        .map(|&(&link, samples)| {
            let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
            let data_weight: f64 = weights.iter().sum();
            if effective_sample_size(&weights) < cfg.min_effective_samples {
                return (link, data_weight, Outcome::Refused);
            }
            let mut x: Vec<f64> = samples.iter().map(|s| s.value_s).collect();
            let mut w = weights;
            for (px, pw) in prior.moments(link).pseudo_samples(cfg.prior_strength) {
                x.push(px);
                w.push(pw);
            }
            match fit_gamma_weighted(&x, &w) {
                Ok(params) => (
                    link,
                    data_weight,
                    Outcome::Fitted(LinkEstimate {
                        params,
                        n_effective: data_weight,
                    }),
                ),
                Err(_) => (link, data_weight, Outcome::Failed),
            }
        })
        .collect();

    let mut next = state.clone();
    next.iterations += 1;
    let mut stats = MStepStats::default();
    for (link, data_weight, outcome) in outcomes {
        match outcome {
            Outcome::Fitted(est) => {
                stats.fitted += 1;
                next.params.insert(link, est.into());
                continue;
            }
            Outcome::Refused => stats.refused += 1,
            Outcome::Failed => stats.failed += 1,
        }
        if !next.params.contains_key(&link) {
            next.insert(link, prior.gamma(link), data_weight);
        }
    }
    (next, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    use crate::gamma::GammaParams;
    use crate::network::{Link, RoadNetwork};
    use crate::prior::PriorConfig;

    fn prior(n: usize) -> PriorTable {
        let links = (0..n)
            .map(|i| Link {
                id: format!("l{i}"),
                from_node: "a".into(),
                to_node: "b".into(),
                length_m: 700.0,
                speed_limit_mps: 10.0,
            })
            .collect();
        PriorTable::new(&RoadNetwork::new(links).unwrap(), &PriorConfig::default())
    }

    fn sample(link: usize, value_s: f64, weight: f64) -> WeightedSample {
        WeightedSample {
            link,
            value_s,
            weight,
            observation_id: Arc::from("o"),
            draw: 0,
        }
    }

    #[test]
    fn untouched_links_keep_their_entries() {
        let p = prior(3);
        let mut state = ModelState::new(0.0);
        state.insert(0, GammaParams::new(2.0, 5.0).unwrap(), 4.0);
        state.insert(2, GammaParams::new(3.0, 5.0).unwrap(), 4.0);
        let mut grouped = BTreeMap::new();
        grouped.insert(2, (0..50).map(|i| sample(2, 10.0 + i as f64, 1.0)).collect::<Vec<_>>());
        let (next, stats) = m_step(&grouped, &state, &p, &EmConfig::default());
        assert_eq!(stats.fitted, 1);
        assert!(Arc::ptr_eq(&state.params[&0], &next.params[&0]));
        assert!(!Arc::ptr_eq(&state.params[&2], &next.params[&2]));
        assert!(!next.params.contains_key(&1));
        assert_eq!(next.iterations, 1);
    }

    #[test]
    fn small_effective_size_is_refused() {
        let p = prior(1);
        let mut grouped = BTreeMap::new();
        grouped.insert(0, vec![sample(0, 10.0, 1.0), sample(0, 12.0, 1e-6)]);
        let (next, stats) = m_step(&grouped, &ModelState::new(0.0), &p, &EmConfig::default());
        assert_eq!(stats.refused, 1);
        assert_eq!(next.get(0), Some(p.gamma(0)));
    }

    #[test]
    fn large_sample_dominates_prior() {
        let p = prior(1);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = Gamma::new(2.0, 5.0).unwrap();
        let mut grouped = BTreeMap::new();
        grouped.insert(0, (0..10_000).map(|_| sample(0, g.sample(&mut rng), 1.0)).collect::<Vec<_>>());
        let (next, _) = m_step(&grouped, &ModelState::new(0.0), &p, &EmConfig::default());
        let fit = next.get(0).unwrap();
        assert!((fit.k / 2.0 - 1.0).abs() < 0.03, "{fit:?}");
        assert!((fit.theta / 5.0 - 1.0).abs() < 0.03, "{fit:?}");
        assert_eq!(next.params[&0].n_effective, 10_000.0);
    }
}
