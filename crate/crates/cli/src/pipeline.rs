//! Offline and streaming drivers for the online estimator.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use dstream::{stable_hash, BatchMetrics, BatchSource, SourceBatch, StreamError, StreamingContext, WorkerPool};
use serde::{Deserialize, Serialize};
use traffic_core::em::{IterationDiagnostics, ModelState, OnlineEstimator, StepReport};
use traffic_core::io::{HistoricalStore, ReplayBatches};
use traffic_core::{activation_vector, Observation, PriorTable, RoadNetwork, TrajectoryMeasurement};

use crate::config::{given, RunConfig};
use crate::CliError;

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub time: f64,
    pub records_in: usize,
    /// Records whose path could not be mapped onto the network.
    pub rejected: usize,
    pub window_size: usize,
    pub processing_time_s: f64,
    pub queue_delay_s: f64,
    pub deadline_missed: bool,
    pub failures: usize,
    /// Diagnostics of the last EM iteration, absent when the window was empty.
    pub em: Option<IterationDiagnostics>,
}

impl StepMetrics {
    fn new(step: u64, report: &StepReport, records_in: usize, rejected: usize) -> Self {
        Self {
            step,
            time: report.time,
            records_in,
            rejected,
            window_size: report.window_size,
            processing_time_s: 0.0,
            queue_delay_s: 0.0,
            deadline_missed: false,
            failures: 0,
            em: report.diagnostics.iterations.last().copied(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub steps: u64,
    pub records_in: usize,
    pub rejected: usize,
    pub deadline_misses: usize,
    pub failures: usize,
    pub processing_time_s: f64,
}

impl RunTotals {
    fn add(&mut self, m: &StepMetrics) {
        self.steps += 1;
        self.records_in += m.records_in;
        self.rejected += m.rejected;
        self.deadline_misses += usize::from(m.deadline_missed);
        self.failures += m.failures;
        self.processing_time_s += m.processing_time_s;
    }

    /// Input records per second of processing time.
    pub fn throughput(&self) -> f64 {
        self.records_in as f64 / self.processing_time_s.max(f64::MIN_POSITIVE)
    }
}

pub type Estimator = OnlineEstimator<HistoricalStore>;

/// Estimator starting from an empty state, with the store configured in
/// `cfg` or an in-memory one when `persist` is false.
pub fn estimator(cfg: &RunConfig, net: &RoadNetwork, persist: bool) -> Result<Estimator, CliError> {
    let history = match given(&cfg.paths.store).filter(|_| persist) {
        Some(root) => HistoricalStore::open(root, cfg.em.time_step_s, cfg.decay.utc_offset_s).map_err(CliError::input)?,
        None => HistoricalStore::in_memory(cfg.em.time_step_s, cfg.decay.utc_offset_s),
    };
    Ok(OnlineEstimator {
        state: ModelState::new(0.0),
        history,
        prior: PriorTable::new(net, &cfg.prior),
        em: cfg.em.clone(),
        decay: cfg.decay.clone(),
        seed: cfg.seed,
    })
}

fn convert(records: &[TrajectoryMeasurement], net: &RoadNetwork) -> (Vec<Observation>, usize) {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if let Ok(o) = activation_vector(r, net) {
            out.push(o);
        }
    }
    let rejected = records.len() - out.len();
    (out, rejected)
}

/// Step the estimator once per `em.time_step_s` of `records`, which must be
/// sorted by start time, without the streaming engine. Step `b` covers
/// `[origin + b*step, origin + (b+1)*step)` and is estimated at its end;
/// `origin` is the first start time rounded down to a whole step.
pub fn run_offline<F>(
    cfg: &RunConfig,
    est: &mut Estimator,
    net: &RoadNetwork,
    records: &[TrajectoryMeasurement],
    mut on_step: F,
) -> Result<RunTotals, CliError>
where
    F: FnMut(&ModelState, &StepMetrics) -> Result<(), CliError>,
{
    if let Some(i) = records.windows(2).position(|w| w[1].start_time < w[0].start_time) {
        return Err(CliError::Data(format!("record {} starts before its predecessor", i + 1)));
    }
    let mut totals = RunTotals::default();
    let Some(first) = records.first() else { return Ok(totals) };
    let step = cfg.em.time_step_s;
    let origin = (first.start_time / step).floor() * step;
    let pool = WorkerPool::new(cfg.scheduler.workers).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rest = records;
    let mut b = 0u64;
    while !rest.is_empty() {
        let end = origin + (b + 1) as f64 * step;
        let n = rest.iter().position(|r| r.start_time >= end).unwrap_or(rest.len());
        let (batch, tail) = rest.split_at(n);
        rest = tail;
        let began = Instant::now();
        let (obs, rejected) = convert(batch, net);
        let report = pool.install(|| est.step(obs, end)).map_err(CliError::output)?;
        let mut m = StepMetrics::new(b, &report, batch.len(), rejected);
        m.processing_time_s = began.elapsed().as_secs_f64();
        totals.add(&m);
        on_step(&est.state, &m)?;
        b += 1;
    }
    Ok(totals)
}

/// Stops a source after a number of batches.
struct Take<S> {
    inner: S,
    left: Option<usize>,
}

impl<T, S: BatchSource<T>> BatchSource<T> for Take<S> {
    fn next_batch(&mut self) -> Option<Result<SourceBatch<T>, StreamError>> {
        if let Some(n) = &mut self.left {
            if *n == 0 {
                return None;
            }
            *n -= 1;
        }
        self.inner.next_batch()
    }
}

struct Pending {
    report: StepReport,
    records_in: usize,
    rejected: usize,
}

/// Replay `source` through the streaming engine, one estimator step per
/// batch, for at most `horizon` batches. The batch interval and deadline
/// come from `cfg.scheduler`, compressed by `rate`.
pub fn run_streaming<F>(
    cfg: &RunConfig,
    est: Estimator,
    net: Arc<RoadNetwork>,
    source: ReplayBatches,
    rate: f64,
    horizon: Option<usize>,
    mut on_step: F,
) -> Result<(Estimator, RunTotals), CliError>
where
    F: FnMut(&ModelState, &StepMetrics) -> Result<(), CliError>,
{
    let step = cfg.em.time_step_s;
    let origin = source.origin();
    let mut ctx = StreamingContext::new(cfg.scheduler.scheduler(rate)).map_err(|e| CliError::Config(e.to_string()))?;
    let input = ctx.source_keyed(
        Take {
            inner: source,
            left: horizon,
        },
        |t: &TrajectoryMeasurement| stable_hash(&t.id),
    );
    let mapped = {
        let net = net.clone();
        input.map(move |t| activation_vector(t, &net).ok())
    };
    let shared = Arc::new(Mutex::new((est, None::<Pending>)));
    let in_sink = shared.clone();
    ctx.for_each_batch(&mapped, move |batch| {
        let origin = origin.expect("non-empty feed has an origin");
        let time = origin + (batch.interval() + 1) as f64 * step;
        let obs: Vec<Observation> = batch.iter().flatten().cloned().collect();
        let rejected = batch.len() - obs.len();
        let mut guard = in_sink.lock().unwrap();
        let report = guard.0.step(obs, time).map_err(|e| e.to_string())?;
        guard.1 = Some(Pending {
            report,
            records_in: batch.len(),
            rejected,
        });
        Ok::<_, String>(())
    });

    let mut totals = RunTotals::default();
    let mut first_error: Option<CliError> = None;
    ctx.run_with(|bm: &BatchMetrics| {
        let mut guard = shared.lock().unwrap();
        let (est, pending) = &mut *guard;
        let mut m = match pending.take() {
            Some(p) => StepMetrics::new(bm.interval, &p.report, p.records_in, p.rejected),
            None => StepMetrics {
                step: bm.interval,
                time: origin.unwrap_or(0.0) + (bm.interval + 1) as f64 * step,
                records_in: bm.records_in,
                rejected: 0,
                window_size: 0,
                processing_time_s: 0.0,
                queue_delay_s: 0.0,
                deadline_missed: false,
                failures: 0,
                em: None,
            },
        };
        m.processing_time_s = bm.processing_time_s;
        m.queue_delay_s = bm.queue_delay_s;
        m.deadline_missed = bm.deadline_missed;
        m.failures = bm.failures;
        totals.add(&m);
        if first_error.is_none() {
            if bm.failures > 0 {
                first_error = Some(CliError::Runtime(format!("step {} failed", bm.interval)));
            } else if let Err(e) = on_step(&est.state, &m) {
                first_error = Some(e);
            }
        }
    })
    .map_err(|e| match e {
        StreamError::Source { .. } => CliError::Data(e.to_string()),
        e => CliError::Runtime(e.to_string()),
    })?;
    drop(ctx);
    if let Some(e) = first_error {
        return Err(e);
    }
    let est = Arc::try_unwrap(shared)
        .unwrap_or_else(|_| panic!("engine released the estimator"))
        .into_inner()
        .unwrap()
        .0;
    Ok((est, totals))
}
