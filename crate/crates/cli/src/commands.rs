//! The five subcommands. Each takes a resolved [`RunConfig`] and returns a
//! JSON summary for stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use traffic_core::em::ModelState;
use traffic_core::eval::{cut_trajectories, evaluate as score, generate, segment_trip, EvalReport, Split};
use traffic_core::io::{
    load_network, read_estimates, read_trajectories, state_from_estimates, write_network, write_trajectories,
    EstimateWriter, ReplayBatches, ReplaySource, FORMAT_VERSION,
};
use traffic_core::seed::rng_for;
use traffic_core::{activation_vector, Observation, PriorTable, RoadNetwork, TrajectoryMeasurement};

use crate::config::{given, FeedKind, RunConfig};
use crate::pipeline::{estimator, run_offline as offline, run_streaming as streaming, RunTotals, StepMetrics};
use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_line(out: &mut impl Write, path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let line = serde_json::to_string(value).expect("record serializes");
    writeln!(out, "{line}").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn sort_feed(records: &mut [TrajectoryMeasurement]) {
    records.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then_with(|| a.id.cmp(&b.id)));
}

/// Generate a synthetic network and write it with its ground truth, the
/// training feed and the held-out pieces.
pub fn simulate(cfg: &RunConfig) -> Result<Value, CliError> {
    let data = generate(&cfg.synthetic);
    let net = &data.network;
    let p = &cfg.paths;
    for path in [&p.network, &p.trajectories, &p.test_pieces, &p.truth] {
        create(path)?;
    }
    write_network(net, &p.network).map_err(CliError::output)?;

    let (train, test): (Vec<_>, Vec<_>) = data.trips.iter().cloned().partition(|t| t.split == Split::Train);
    let mut feed = match cfg.simulate.feed {
        FeedKind::Segments => {
            let mut rng = rng_for(cfg.synthetic.seed, &[&"feed"]);
            train
                .iter()
                .flat_map(|t| segment_trip(t, net, cfg.simulate.max_links, &mut rng))
                .collect()
        }
        FeedKind::Readings => cut_trajectories(&train, net, &[cfg.simulate.reading_s]),
    };
    sort_feed(&mut feed);
    write_trajectories(&p.trajectories, &feed).map_err(CliError::output)?;
    let mut pieces = cut_trajectories(&test, net, &cfg.simulate.piece_lengths_s);
    sort_feed(&mut pieces);
    write_trajectories(&p.test_pieces, &pieces).map_err(CliError::output)?;

    let mut truth = ModelState::new(cfg.synthetic.start_time);
    for (l, &params) in data.truth.iter().enumerate() {
        truth.insert(l, params, 0.0);
    }
    let mut w = EstimateWriter::create(&p.truth).map_err(CliError::output)?;
    w.write_state(&truth, net).map_err(CliError::output)?;
    w.finish().map_err(CliError::output)?;

    Ok(json!({
        "links": net.len(),
        "trips": data.trips.len(),
        "train_records": feed.len(),
        "test_pieces": pieces.len(),
        "network": p.network,
        "trajectories": p.trajectories,
        "test_pieces_path": p.test_pieces,
        "truth": p.truth,
    }))
}

fn read_feed(path: &Path) -> Result<(Vec<TrajectoryMeasurement>, usize), CliError> {
    let mut reader = read_trajectories(path).map_err(CliError::input)?;
    let mut records = Vec::new();
    for r in reader.by_ref() {
        records.push(r.map_err(CliError::input)?);
    }
    Ok((records, reader.skipped()))
}

fn prior_state(net: &RoadNetwork, cfg: &RunConfig) -> ModelState {
    let prior = PriorTable::new(net, &cfg.prior);
    let mut s = ModelState::new(0.0);
    for l in 0..net.len() {
        s.insert(l, prior.gamma(l), 0.0);
    }
    s
}

/// Estimate and metrics files written step by step.
struct Outputs {
    estimates: EstimateWriter,
    metrics: BufWriter<File>,
    metrics_path: PathBuf,
    net: Arc<RoadNetwork>,
}

impl Outputs {
    fn create(cfg: &RunConfig, net: Arc<RoadNetwork>) -> Result<Self, CliError> {
        let p = &cfg.paths;
        create(&p.estimates)?;
        let mut metrics = create(&p.metrics)?;
        write_line(&mut metrics, &p.metrics, &json!({ "format_version": FORMAT_VERSION, "kind": "metrics" }))?;
        Ok(Self {
            estimates: EstimateWriter::create(&p.estimates).map_err(CliError::output)?,
            metrics,
            metrics_path: p.metrics.clone(),
            net,
        })
    }

    fn step(&mut self, state: &ModelState, m: &StepMetrics) -> Result<(), CliError> {
        self.estimates.write_state(state, &self.net).map_err(CliError::output)?;
        write_line(&mut self.metrics, &self.metrics_path, m)
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.metrics
            .flush()
            .map_err(|e| CliError::Runtime(format!("{}: {e}", self.metrics_path.display())))?;
        self.estimates.finish().map_err(CliError::output)?;
        Ok(())
    }
}

fn run_summary(cfg: &RunConfig, totals: &RunTotals, skipped: usize, state: &ModelState) -> Value {
    json!({
        "profile": cfg.profile,
        "steps": totals.steps,
        "records": totals.records_in,
        "malformed_lines": skipped,
        "rejected": totals.rejected,
        "links_estimated": state.params.len(),
        "deadline_misses": totals.deadline_misses,
        "failures": totals.failures,
        "processing_time_s": totals.processing_time_s,
        "throughput_obs_per_s": totals.throughput(),
        "estimates": cfg.paths.estimates,
        "metrics": cfg.paths.metrics,
    })
}

/// Batch EM over the whole feed, one estimate per time step.
pub fn run_offline(cfg: &RunConfig) -> Result<Value, CliError> {
    let net = Arc::new(load_network(&cfg.paths.network).map_err(CliError::input)?);
    let (records, skipped) = read_feed(&cfg.paths.trajectories)?;
    let mut est = estimator(cfg, &net, true)?;
    let mut out = Outputs::create(cfg, net.clone())?;
    let totals = offline(cfg, &mut est, &net, &records, |s, m| out.step(s, m))?;
    if totals.steps == 0 {
        est.state = prior_state(&net, cfg);
        out.estimates.write_state(&est.state, &net).map_err(CliError::output)?;
    }
    out.finish()?;
    Ok(run_summary(cfg, &totals, skipped, &est.state))
}

/// Replay the feed through the streaming engine.
pub fn run_streaming(cfg: &RunConfig) -> Result<Value, CliError> {
    let net = Arc::new(load_network(&cfg.paths.network).map_err(CliError::input)?);
    let source = ReplaySource {
        path: cfg.paths.trajectories.clone(),
        rate_multiplier: cfg.rate_multiplier,
        interval_s: cfg.scheduler.interval_s,
    }
    .open()
    .map_err(CliError::input)?;
    let est = estimator(cfg, &net, true)?;
    let mut out = Outputs::create(cfg, net.clone())?;
    let (mut est, totals) = streaming(cfg, est, net.clone(), source, cfg.rate_multiplier, None, |s, m| out.step(s, m))?;
    if totals.steps == 0 {
        est.state = prior_state(&net, cfg);
        out.estimates.write_state(&est.state, &net).map_err(CliError::output)?;
    }
    out.finish()?;
    Ok(run_summary(cfg, &totals, 0, &est.state))
}

fn load_model(path: &Path, net: &RoadNetwork) -> Result<ModelState, CliError> {
    let records = read_estimates(path).map_err(CliError::input)?;
    state_from_estimates(&records, net, path).map_err(CliError::input)
}

fn report_files(stem: &Path) -> (PathBuf, PathBuf) {
    let mut json = stem.as_os_str().to_owned();
    json.push(".json");
    let mut csv = stem.as_os_str().to_owned();
    csv.push(".csv");
    (json.into(), csv.into())
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Score the held-out pieces against the latest estimate of every link,
/// and optionally against a second estimate file side by side.
pub fn evaluate(cfg: &RunConfig) -> Result<Value, CliError> {
    let p = &cfg.paths;
    let net = load_network(&p.network).map_err(CliError::input)?;
    let (records, skipped) = read_feed(&p.test_pieces)?;
    let pieces: Vec<Observation> = records.iter().filter_map(|r| activation_vector(r, &net).ok()).collect();
    let rejected = records.len() - pieces.len();
    let model = load_model(&p.estimates, &net)?;
    let report = score(&model, &pieces, &cfg.em.series);
    let (json_path, csv_path) = report_files(&p.report);
    create(&json_path)?;
    report.write_json(&json_path).map_err(CliError::output)?;
    report.write_csv(&csv_path).map_err(CliError::output)?;

    let mut summary = json!({
        "pieces": pieces.len(),
        "malformed_lines": skipped,
        "rejected": rejected,
        "report": [json_path, csv_path],
        "buckets": report.buckets.iter().map(|b| json!({
            "bucket": b.label,
            "count": b.count,
            "l1": b.l1.map(|m| m.value),
            "log_likelihood": b.log_likelihood.map(|m| m.value),
        })).collect::<Vec<_>>(),
    });
    if let Some(other_path) = given(&p.compare_estimates) {
        let other = score(&load_model(other_path, &net)?, &pieces, &cfg.em.series);
        let mut table_path = p.report.as_os_str().to_owned();
        table_path.push("_comparison.csv");
        let table_path = PathBuf::from(table_path);
        let table = comparison_table(&[(label(&p.estimates), &report), (label(other_path), &other)]);
        std::fs::write(&table_path, &table).map_err(|e| CliError::Runtime(format!("{}: {e}", table_path.display())))?;
        print!("{table}");
        summary["comparison"] = json!(table_path);
    }
    Ok(summary)
}

/// CSV with one row per bucket and metric and a value and interval column
/// group per report.
pub fn comparison_table(reports: &[(String, &EvalReport)]) -> String {
    let mut out = String::from("bucket,metric");
    for (name, _) in reports {
        out.push_str(&format!(",{name},{name}_ci_low,{name}_ci_high"));
    }
    out.push('\n');
    let Some((_, first)) = reports.first() else { return out };
    for (bucket, metric, _) in first.rows() {
        out.push_str(&format!("{bucket},{metric}"));
        for (_, r) in reports {
            match r.rows().into_iter().find(|(b, m, _)| *b == bucket && *m == metric) {
                Some((_, _, s)) => out.push_str(&format!(",{},{},{}", s.value, s.ci_low, s.ci_high)),
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTrial {
    pub rate: f64,
    pub deadline_misses: usize,
    pub records: usize,
    pub processing_time_s: f64,
    pub max_processing_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub workers: usize,
    pub interval_s: f64,
    pub deadline_s: f64,
    pub horizon_intervals: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    /// Highest tested rate with no deadline miss; `None` if even
    /// `rate_min` missed.
    pub max_rate: Option<f64>,
    /// Records per wall second at `max_rate`.
    pub observations_per_s: f64,
    pub trials: Vec<BenchTrial>,
}

/// Replay the first `bench.horizon_intervals` batches of `records` at
/// `rate` times the recorded speed with a fresh in-memory estimator.
pub fn bench_trial(
    cfg: &RunConfig,
    net: &Arc<RoadNetwork>,
    records: &[TrajectoryMeasurement],
    rate: f64,
) -> Result<BenchTrial, CliError> {
    let source =
        ReplayBatches::from_records(records.to_vec(), cfg.scheduler.interval_s, rate).map_err(CliError::input)?;
    let est = estimator(cfg, net, false)?;
    let mut max_processing: f64 = 0.0;
    let (_, totals) = streaming(cfg, est, net.clone(), source, rate, Some(cfg.bench.horizon_intervals), |_, m| {
        max_processing = max_processing.max(m.processing_time_s);
        Ok(())
    })?;
    Ok(BenchTrial {
        rate,
        deadline_misses: totals.deadline_misses,
        records: totals.records_in,
        processing_time_s: totals.processing_time_s,
        max_processing_time_s: max_processing,
    })
}

/// Bisect the replay rate, on a log scale within
/// `[bench.rate_min, bench.rate_max]`, for the fastest replay without a
/// deadline miss.
pub fn bench_records(cfg: &RunConfig, net: Arc<RoadNetwork>, records: &[TrajectoryMeasurement]) -> Result<BenchReport, CliError> {
    let b = &cfg.bench;
    let mut trials = Vec::new();
    let run = |rate: f64, trials: &mut Vec<BenchTrial>| -> Result<bool, CliError> {
        let t = bench_trial(cfg, &net, records, rate)?;
        let ok = t.deadline_misses == 0;
        trials.push(t);
        Ok(ok)
    };
    let max_rate = if !run(b.rate_min, &mut trials)? {
        None
    } else if run(b.rate_max, &mut trials)? {
        Some(b.rate_max)
    } else {
        let (mut lo, mut hi) = (b.rate_min.ln(), b.rate_max.ln());
        for _ in 0..b.rounds {
            let mid = 0.5 * (lo + hi);
            if run(mid.exp(), &mut trials)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo.exp())
    };
    let records_in = trials[0].records;
    let horizon_s = b.horizon_intervals as f64 * cfg.scheduler.interval_s;
    Ok(BenchReport {
        workers: cfg.scheduler.workers,
        interval_s: cfg.scheduler.interval_s,
        deadline_s: cfg.scheduler.deadline_s,
        horizon_intervals: b.horizon_intervals,
        rate_min: b.rate_min,
        rate_max: b.rate_max,
        max_rate,
        observations_per_s: max_rate.map_or(0.0, |r| records_in as f64 * r / horizon_s),
        trials,
    })
}

/// Highest sustainable replay rate for the configured feed.
pub fn bench(cfg: &RunConfig) -> Result<Value, CliError> {
    let net = Arc::new(load_network(&cfg.paths.network).map_err(CliError::input)?);
    let (records, _) = read_feed(&cfg.paths.trajectories)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no records to replay", cfg.paths.trajectories.display())));
    }
    let report = bench_records(cfg, net, &records)?;
    let mut out = create(&cfg.paths.metrics)?;
    write_line(&mut out, &cfg.paths.metrics, &report)?;
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}
