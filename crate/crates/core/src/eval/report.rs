use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{path_log_likelihood, ModelState};
use crate::gamma::{GammaParams, SeriesConfig};
use crate::io::IoError;
use crate::network::Observation;

/// Observed-duration buckets in minutes; the last is closed on the right.
pub const DURATION_BUCKETS_MIN: [(f64, f64); 4] = [(1.0, 3.0), (3.0, 7.0), (7.0, 14.0), (14.0, 30.0)];

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub label: String,
    pub min_minutes: f64,
    pub max_minutes: f64,
    pub count: usize,
    /// Metrics are absent for empty buckets.
    pub l1: Option<MetricSummary>,
    pub l1_relative: Option<MetricSummary>,
    pub rmse: Option<MetricSummary>,
    pub rmse_relative: Option<MetricSummary>,
    pub log_likelihood: Option<MetricSummary>,
    /// Log-likelihood plus the entropy of the moment-matched predictive
    /// Gamma; close to zero on average when the model is right.
    pub normalized_log_likelihood: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub buckets: Vec<BucketReport>,
    /// Pieces over links without parameters.
    pub excluded_missing_params: usize,
    pub excluded_out_of_range: usize,
    pub likelihood_failures: usize,
}

struct Scored {
    bucket: usize,
    abs: f64,
    rel: f64,
    ll: f64,
    normalized: f64,
}

enum Outcome {
    Scored(Scored),
    MissingParams,
    OutOfRange,
    LikelihoodFailed,
}

fn bucket_of(duration_s: f64) -> Option<usize> {
    let minutes = duration_s / 60.0;
    let last = DURATION_BUCKETS_MIN.len() - 1;
    DURATION_BUCKETS_MIN
        .iter()
        .enumerate()
        .position(|(i, &(lo, hi))| minutes >= lo && (minutes < hi || (i == last && minutes <= hi)))
}

fn score(obs: &Observation, model: &ModelState, cfg: &SeriesConfig) -> Outcome {
    let mut mean = 0.0;
    let mut var = 0.0;
    for &(l, a) in &obs.weights {
        let Some(p) = model.get(l) else {
            return Outcome::MissingParams;
        };
        mean += a * p.mean();
        var += a * a * p.variance();
    }
    let Some(bucket) = bucket_of(obs.duration_s) else {
        return Outcome::OutOfRange;
    };
    let Ok(ll) = path_log_likelihood(obs, model, cfg) else {
        return Outcome::LikelihoodFailed;
    };
    let matched = GammaParams {
        k: mean * mean / var,
        theta: var / mean,
    };
    let abs = (obs.duration_s - mean).abs();
    Outcome::Scored(Scored {
        bucket,
        abs,
        rel: abs / obs.duration_s,
        ll,
        normalized: ll + matched.entropy(),
    })
}

/// Mean and normal-approximation 95% interval. Values are summed in sorted
/// order so the result does not depend on input order.
fn summarize(mut v: Vec<f64>) -> Option<MetricSummary> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = Z95 * (var / n).sqrt();
    Some(MetricSummary {
        value: mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

/// Root of a mean-square summary, interval endpoints included.
fn root(m: MetricSummary) -> MetricSummary {
    MetricSummary {
        value: m.value.sqrt(),
        ci_low: m.ci_low.max(0.0).sqrt(),
        ci_high: m.ci_high.sqrt(),
    }
}

/// Score held-out pieces against a model, bucketed by observed duration.
pub fn evaluate(model: &ModelState, pieces: &[Observation], cfg: &SeriesConfig) -> EvalReport {
    let outcomes: Vec<Outcome> = pieces.par_iter().map(|o| score(o, model, cfg)).collect();
    let mut per_bucket: Vec<Vec<Scored>> = DURATION_BUCKETS_MIN.iter().map(|_| Vec::new()).collect();
    let mut report = EvalReport {
        buckets: Vec::new(),
        excluded_missing_params: 0,
        excluded_out_of_range: 0,
        likelihood_failures: 0,
    };
    for o in outcomes {
        match o {
            Outcome::Scored(s) => per_bucket[s.bucket].push(s),
            Outcome::MissingParams => report.excluded_missing_params += 1,
            Outcome::OutOfRange => report.excluded_out_of_range += 1,
            Outcome::LikelihoodFailed => report.likelihood_failures += 1,
        }
    }
    for (scored, &(lo, hi)) in per_bucket.iter().zip(&DURATION_BUCKETS_MIN) {
        let col = |f: fn(&Scored) -> f64| summarize(scored.iter().map(f).collect());
        report.buckets.push(BucketReport {
            label: format!("{lo}-{hi} min"),
            min_minutes: lo,
            max_minutes: hi,
            count: scored.len(),
            l1: col(|s| s.abs),
            l1_relative: col(|s| s.rel),
            rmse: col(|s| s.abs * s.abs).map(root),
            rmse_relative: col(|s| s.rel * s.rel).map(root),
            log_likelihood: col(|s| s.ll),
            normalized_log_likelihood: col(|s| s.normalized),
        });
    }
    report
}

impl EvalReport {
    /// Rows of `(bucket, metric, summary)` in a fixed order, skipping empty
    /// buckets.
    pub fn rows(&self) -> Vec<(&str, &'static str, MetricSummary)> {
        let mut rows = Vec::new();
        for b in &self.buckets {
            for (name, m) in [
                ("l1", b.l1),
                ("l1_relative", b.l1_relative),
                ("rmse", b.rmse),
                ("rmse_relative", b.rmse_relative),
                ("log_likelihood", b.log_likelihood),
                ("normalized_log_likelihood", b.normalized_log_likelihood),
            ] {
                if let Some(m) = m {
                    rows.push((b.label.as_str(), name, m));
                }
            }
        }
        rows
    }

    pub fn write_json(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n").map_err(crate::io::io_err(path))
    }

    /// CSV with columns bucket, metric, value, ci_low, ci_high, count.
    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let mut out = Vec::new();
        writeln!(out, "bucket,metric,value,ci_low,ci_high,count").unwrap();
        for b in &self.buckets {
            for (label, name, m) in self.rows().into_iter().filter(|r| r.0 == b.label) {
                writeln!(out, "{label},{name},{},{},{},{}", m.value, m.ci_low, m.ci_high, b.count).unwrap();
            }
        }
        std::fs::write(path, out).map_err(crate::io::io_err(path))
    }
}
