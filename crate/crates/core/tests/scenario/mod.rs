//! Synthetic experiments shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use traffic_core::em::{em_iterate, EmConfig, EmDiagnostics, ModelState};
use traffic_core::eval::{cut_trajectories, evaluate, generate, segment_trip, EvalReport, Split, SyntheticData, SyntheticSpec};
use traffic_core::seed::rng_for;
use traffic_core::{activation_vector, Observation, PriorConfig, PriorTable, TrajectoryMeasurement};

/// Split every trip of `split` into runs of up to `max_links` fully
/// traversed links, as activation vectors.
pub fn segments(data: &SyntheticData, split: Option<Split>, max_links: usize, seed: u64) -> Vec<Observation> {
    let mut rng = rng_for(seed, &[]);
    data.trips
        .iter()
        .filter(|t| split.is_none_or(|s| t.split == s))
        .flat_map(|t| segment_trip(t, &data.network, max_links, &mut rng))
        .filter_map(|p| activation_vector(&p, &data.network).ok())
        .collect()
}

pub fn traversal_counts(obs: &[Observation]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for o in obs {
        for l in o.links() {
            *counts.entry(l).or_default() += 1;
        }
    }
    counts
}

pub fn fit_offline(data: &SyntheticData, obs: &[Observation], cfg: &EmConfig, seed: u64) -> (ModelState, EmDiagnostics) {
    let weighted: Vec<_> = obs.iter().cloned().map(|o| (o, 1.0)).collect();
    let prior = PriorTable::new(&data.network, &PriorConfig::default());
    em_iterate(&weighted, &ModelState::new(0.0), &prior, cfg, seed, 0.0)
}

pub struct Recovery {
    pub checked: usize,
    pub within: usize,
    pub worst: f64,
    pub median: f64,
    pub diagnostics: EmDiagnostics,
    pub q_ok: bool,
}

/// 100-link network, 10^4 observations of one or two links each, default
/// EM settings; compares fitted link means with the generator's for links
/// traversed at least 30 times.
pub fn recovery(seed: u64) -> Recovery {
    let data = generate(&SyntheticSpec {
        duration_h: 2.7,
        seed,
        ..SyntheticSpec::default()
    });
    let obs: Vec<_> = segments(&data, None, 2, seed + 2).into_iter().take(10_000).collect();
    assert_eq!(obs.len(), 10_000);
    let (state, diagnostics) = fit_offline(&data, &obs, &EmConfig::default(), 7);
    let mut errors: Vec<f64> = traversal_counts(&obs)
        .into_iter()
        .filter(|&(_, n)| n >= 30)
        .map(|(l, _)| {
            let want = data.truth[l].mean();
            (state.get(l).unwrap().mean() - want).abs() / want
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let q_ok = diagnostics
        .iterations
        .windows(2)
        .all(|w| w[1].q >= w[0].q - 3.0 * w[0].q_se.hypot(w[1].q_se));
    Recovery {
        checked: errors.len(),
        within: errors.iter().filter(|&&e| e <= 0.10).count(),
        worst: *errors.last().unwrap(),
        median: errors[errors.len() / 2],
        diagnostics,
        q_ok,
    }
}

/// Train on segments of the training trips, then score test data.
pub fn held_out_report(correlation: Option<f64>, fixed_length_pieces: bool) -> EvalReport {
    let data = generate(&SyntheticSpec {
        duration_h: 4.0,
        correlation_shape: correlation,
        seed: 5,
        ..SyntheticSpec::default()
    });
    let train = segments(&data, Some(Split::Train), 2, 8);
    let (model, _) = fit_offline(&data, &train, &EmConfig::default(), 3);
    let pieces: Vec<Observation> = if fixed_length_pieces {
        let test: Vec<_> = data.trips.iter().filter(|t| t.split == Split::Test).cloned().collect();
        let cut: Vec<TrajectoryMeasurement> = cut_trajectories(&test, &data.network, &[60.0, 300.0, 600.0, 1200.0]);
        cut.iter().filter_map(|p| activation_vector(p, &data.network).ok()).collect()
    } else {
        segments(&data, Some(Split::Test), 20, 9)
    };
    evaluate(&model, &pieces, &EmConfig::default().series)
}

/// Mean log-likelihood strictly falls from each bucket to the next.
pub fn strictly_decreasing_log_likelihood(r: &EvalReport) -> bool {
    let v: Vec<Option<f64>> = r.buckets.iter().map(|b| b.log_likelihood.map(|m| m.value)).collect();
    v.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b < a))
}

/// Every pair of bucket intervals for the normalized log-likelihood overlaps.
pub fn normalized_intervals_overlap(r: &EvalReport) -> bool {
    let cis: Vec<_> = r.buckets.iter().filter_map(|b| b.normalized_log_likelihood).collect();
    cis.len() == r.buckets.len()
        && cis.iter().all(|a| cis.iter().all(|b| a.ci_low <= b.ci_high && b.ci_low <= a.ci_high))
}
