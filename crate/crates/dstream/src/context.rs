use std::marker::PhantomData;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::node::{is_active, BatchStore, Exec, GraphMeta, Node, NodeId};
use crate::stream::SourceNode;
use crate::{BatchMetrics, BatchSource, DStream, MicroBatch, StreamError, WorkerPool};

/// How the scheduler relates batch availability to wall time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Logical time: batches are processed back to back and deadlines are
    /// checked against a simulated timeline built from source availability
    /// offsets and measured processing times.
    Virtual,
    /// Wait in real time until each batch becomes available.
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub interval: Duration,
    /// Maximum latency from batch availability to completion.
    pub deadline: Duration,
    pub workers: usize,
    pub shards: usize,
    pub clock: ClockMode,
}

impl SchedulerConfig {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            deadline: interval,
            workers: 1,
            shards: 8,
            clock: ClockMode::Virtual,
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.interval.is_zero() {
            return Err(StreamError::Config("interval must be positive".into()));
        }
        if self.deadline.is_zero() {
            return Err(StreamError::Config("deadline must be positive".into()));
        }
        if self.workers == 0 {
            return Err(StreamError::Config("workers must be >= 1".into()));
        }
        if self.shards == 0 {
            return Err(StreamError::Config("shards must be >= 1".into()));
        }
        Ok(())
    }
}

trait SourceSlot: Send {
    /// Seal interval `t`; `None` when the source has nothing more.
    fn poll(&mut self, t: u64, exec: &Exec<'_>) -> Option<Result<(usize, Duration), StreamError>>;
    fn seal_empty(&mut self, t: u64, exec: &Exec<'_>);
}

type KeyFn<T> = Box<dyn Fn(&T) -> u64 + Send + Sync>;

struct TypedSource<T> {
    id: NodeId,
    src: Box<dyn BatchSource<T>>,
    key: Option<KeyFn<T>>,
}

impl<T: Send + Sync + 'static> TypedSource<T> {
    fn seal(&self, t: u64, records: Vec<T>, exec: &Exec<'_>) {
        let (start, len, shards) = (exec.interval_start(t), exec.meta.interval, exec.meta.shards);
        let batch = match &self.key {
            Some(key) => MicroBatch::keyed(t, start, len, records, shards, key.as_ref()),
            None => MicroBatch::round_robin(t, start, len, records, shards),
        };
        exec.store.seal(self.id, batch);
    }
}

impl<T: Send + Sync + 'static> SourceSlot for TypedSource<T> {
    fn poll(&mut self, t: u64, exec: &Exec<'_>) -> Option<Result<(usize, Duration), StreamError>> {
        match self.src.next_batch()? {
            Ok(b) => {
                let n = b.records.len();
                self.seal(t, b.records, exec);
                Some(Ok((n, b.available_at)))
            }
            Err(e) => Some(Err(e)),
        }
    }

    fn seal_empty(&mut self, t: u64, exec: &Exec<'_>) {
        self.seal(t, Vec::new(), exec);
    }
}

struct Delivery {
    records: usize,
    failed: bool,
}

trait OutputSlot: Send {
    fn deliver(&mut self, t: u64, exec: &Exec<'_>) -> Option<Delivery>;
}

struct TypedOutput<T, F> {
    node: Arc<dyn Node<T>>,
    sink: F,
}

impl<T, F, E> OutputSlot for TypedOutput<T, F>
where
    T: Send + Sync + 'static,
    F: FnMut(&MicroBatch<T>) -> Result<(), E> + Send,
    E: std::fmt::Display,
{
    fn deliver(&mut self, t: u64, exec: &Exec<'_>) -> Option<Delivery> {
        if !is_active(self.node.slide(), t) {
            return None;
        }
        let outcome = match exec.get(self.node.as_ref(), t) {
            Ok(batch) => match (self.sink)(&batch) {
                Ok(()) => Delivery {
                    records: batch.len(),
                    failed: false,
                },
                Err(e) => {
                    let err = StreamError::Sink {
                        interval: t,
                        message: e.to_string(),
                    };
                    eprintln!("dstream: {err}");
                    Delivery {
                        records: 0,
                        failed: true,
                    }
                }
            },
            Err(e) => {
                eprintln!("dstream: interval {t} failed: {e}");
                Delivery {
                    records: 0,
                    failed: true,
                }
            }
        };
        Some(outcome)
    }
}

/// Owner of a stream graph, its sources and outputs, and the scheduler.
pub struct StreamingContext {
    cfg: SchedulerConfig,
    meta: Arc<GraphMeta>,
    pool: Arc<WorkerPool>,
    store: BatchStore,
    sources: Vec<Box<dyn SourceSlot>>,
    outputs: Vec<Box<dyn OutputSlot>>,
    next_interval: u64,
}

impl StreamingContext {
    pub fn new(cfg: SchedulerConfig) -> Result<Self, StreamError> {
        cfg.validate()?;
        let pool = Arc::new(WorkerPool::new(cfg.workers)?);
        Ok(Self {
            meta: Arc::new(GraphMeta::new(cfg.interval, cfg.shards)),
            cfg,
            pool,
            store: BatchStore::default(),
            sources: Vec::new(),
            outputs: Vec::new(),
            next_interval: 0,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    pub fn pool(&self) -> Arc<WorkerPool> {
        self.pool.clone()
    }

    fn add_source<T: Send + Sync + 'static>(&mut self, src: Box<dyn BatchSource<T>>, key: Option<KeyFn<T>>) -> DStream<T> {
        let id = self.meta.allocate();
        self.sources.push(Box::new(TypedSource { id, src, key }));
        DStream {
            node: Arc::new(SourceNode::<T> { id, _t: PhantomData }),
            meta: self.meta.clone(),
        }
    }

    /// Register an input stream; records are spread over shards by position.
    pub fn source<T, S>(&mut self, src: S) -> DStream<T>
    where
        T: Send + Sync + 'static,
        S: BatchSource<T> + 'static,
    {
        self.add_source(Box::new(src), None)
    }

    /// Register an input stream sharded by the stable hash `key` returns.
    pub fn source_keyed<T, S, K>(&mut self, src: S, key: K) -> DStream<T>
    where
        T: Send + Sync + 'static,
        S: BatchSource<T> + 'static,
        K: Fn(&T) -> u64 + Send + Sync + 'static,
    {
        self.add_source(Box::new(src), Some(Box::new(key)))
    }

    /// Call `sink` once per interval at which `stream` produces output, in
    /// interval order, after the batch is fully computed. Failures are
    /// counted in the interval's metrics and do not stop the run.
    pub fn for_each_batch<T, F, E>(&mut self, stream: &DStream<T>, sink: F)
    where
        T: Send + Sync + 'static,
        F: FnMut(&MicroBatch<T>) -> Result<(), E> + Send + 'static,
        E: std::fmt::Display + 'static,
    {
        self.outputs.push(Box::new(TypedOutput {
            node: stream.node.clone(),
            sink,
        }));
    }

    /// Recompute the batch of `stream` at interval `t` from the sealed
    /// source batches alone, ignoring every memoized intermediate.
    pub fn recompute<T: Send + Sync + 'static>(&self, stream: &DStream<T>, t: u64) -> Result<Arc<MicroBatch<T>>, StreamError> {
        let store = self.store.sources_only();
        let exec = Exec {
            store: &store,
            meta: &self.meta,
        };
        self.pool.install(|| exec.get(stream.node.as_ref(), t))
    }

    /// Drop every memoized intermediate batch; sealed sources remain.
    pub fn discard_intermediates(&self) {
        self.store.clear_derived();
    }

    pub fn run(&mut self) -> Result<Vec<BatchMetrics>, StreamError> {
        let mut all = Vec::new();
        self.run_with(|m| all.push(m.clone()))?;
        Ok(all)
    }

    /// Run until every source is exhausted, reporting each interval.
    pub fn run_with<M: FnMut(&BatchMetrics)>(&mut self, mut on_metrics: M) -> Result<(), StreamError> {
        let wall_start = Instant::now();
        let mut virtual_finish = Duration::ZERO;
        let mut exhausted = vec![false; self.sources.len()];
        loop {
            let t = self.next_interval;
            let exec = Exec {
                store: &self.store,
                meta: &self.meta,
            };
            let mut records_in = 0;
            let mut available = Duration::ZERO;
            for (i, src) in self.sources.iter_mut().enumerate() {
                if exhausted[i] {
                    src.seal_empty(t, &exec);
                    continue;
                }
                match src.poll(t, &exec) {
                    Some(Ok((n, at))) => {
                        records_in += n;
                        available = available.max(at);
                    }
                    Some(Err(e)) => return Err(e),
                    None => {
                        exhausted[i] = true;
                        src.seal_empty(t, &exec);
                    }
                }
            }
            if exhausted.iter().all(|&e| e) {
                break;
            }

            let start = match self.cfg.clock {
                ClockMode::WallClock => {
                    let now = wall_start.elapsed();
                    if available > now {
                        std::thread::sleep(available - now);
                    }
                    wall_start.elapsed()
                }
                ClockMode::Virtual => available.max(virtual_finish),
            };
            let began = Instant::now();
            let outputs = &mut self.outputs;
            let deliveries: Vec<Delivery> = self
                .pool
                .install(|| outputs.iter_mut().filter_map(|o| o.deliver(t, &exec)).collect());
            let processing = began.elapsed();
            let finish = start + processing;
            virtual_finish = finish;

            let metrics = BatchMetrics {
                interval: t,
                interval_start_s: exec.interval_start(t).as_secs_f64(),
                records_in,
                records_out: deliveries.iter().map(|d| d.records).sum(),
                processing_time_s: processing.as_secs_f64(),
                queue_delay_s: start.saturating_sub(available).as_secs_f64(),
                deadline_missed: finish.saturating_sub(available) > self.cfg.deadline,
                failures: deliveries.iter().filter(|d| d.failed).count(),
            };
            on_metrics(&metrics);

            let keep_from = (t + 1).saturating_sub(self.meta.max_lookback() + 1);
            self.store.evict_derived(keep_from);
            self.next_interval += 1;
        }
        Ok(())
    }
}
