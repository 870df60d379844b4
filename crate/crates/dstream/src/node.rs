//! Type-erased execution plumbing shared by operators and the scheduler.

use std::any::Any;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::{MicroBatch, StreamError};

pub(crate) type NodeId = usize;
type Erased = Arc<dyn Any + Send + Sync>;

/// Graph-wide settings shared by every stream handle of one context.
#[derive(Debug)]
pub(crate) struct GraphMeta {
    pub interval: Duration,
    pub shards: usize,
    next_id: AtomicUsize,
    max_lookback: AtomicU64,
}

impl GraphMeta {
    pub fn new(interval: Duration, shards: usize) -> Self {
        Self {
            interval,
            shards,
            next_id: AtomicUsize::new(0),
            max_lookback: AtomicU64::new(1),
        }
    }

    pub fn allocate(&self) -> NodeId {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    pub fn require_lookback(&self, intervals: u64) {
        self.max_lookback.fetch_max(intervals, Ordering::Relaxed);
    }

    pub fn max_lookback(&self) -> u64 {
        self.max_lookback.load(Ordering::Relaxed)
    }
}

/// One operator of the graph producing batches of `T`.
pub(crate) trait Node<T>: Send + Sync {
    fn id(&self) -> NodeId;
    /// Output is produced at intervals `t` with `(t + 1) % slide == 0`.
    fn slide(&self) -> u64;
    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<T>>, StreamError>;
}

pub(crate) fn is_active(slide: u64, t: u64) -> bool {
    (t + 1).is_multiple_of(slide)
}

/// Sealed source data plus memoized derived batches.
#[derive(Default)]
pub(crate) struct BatchStore {
    sources: Mutex<HashMap<(NodeId, u64), Erased>>,
    derived: Mutex<HashMap<(NodeId, u64), Erased>>,
}

impl BatchStore {
    pub fn seal<T: Send + Sync + 'static>(&self, node: NodeId, batch: MicroBatch<T>) {
        let t = batch.interval();
        self.sources.lock().unwrap().insert((node, t), Arc::new(batch));
    }

    fn lookup<T: Send + Sync + 'static>(&self, node: NodeId, t: u64) -> Option<Arc<MicroBatch<T>>> {
        let hit = self
            .sources
            .lock()
            .unwrap()
            .get(&(node, t))
            .cloned()
            .or_else(|| self.derived.lock().unwrap().get(&(node, t)).cloned())?;
        Some(hit.downcast::<MicroBatch<T>>().expect("node output type mismatch"))
    }

    pub fn source<T: Send + Sync + 'static>(&self, node: NodeId, t: u64) -> Option<Arc<MicroBatch<T>>> {
        let hit = self.sources.lock().unwrap().get(&(node, t)).cloned()?;
        Some(hit.downcast::<MicroBatch<T>>().expect("node output type mismatch"))
    }

    fn memoize<T: Send + Sync + 'static>(&self, node: NodeId, t: u64, batch: Arc<MicroBatch<T>>) {
        self.derived.lock().unwrap().insert((node, t), batch);
    }

    /// Drop derived batches of intervals `< before`.
    pub fn evict_derived(&self, before: u64) {
        self.derived.lock().unwrap().retain(|&(_, t), _| t >= before);
    }

    pub fn clear_derived(&self) {
        self.derived.lock().unwrap().clear();
    }

    /// A store holding the same sealed sources and no derived batches.
    pub fn sources_only(&self) -> BatchStore {
        BatchStore {
            sources: Mutex::new(self.sources.lock().unwrap().clone()),
            derived: Mutex::new(HashMap::new()),
        }
    }
}

/// Execution environment for one interval.
pub(crate) struct Exec<'a> {
    pub store: &'a BatchStore,
    pub meta: &'a GraphMeta,
}

impl Exec<'_> {
    pub fn interval_start(&self, t: u64) -> Duration {
        Duration::from_nanos((self.meta.interval.as_nanos() as u64).saturating_mul(t))
    }

    /// Fetch a memoized batch or compute (and memoize) it.
    pub fn get<T: Send + Sync + 'static>(
        &self,
        node: &dyn Node<T>,
        t: u64,
    ) -> Result<Arc<MicroBatch<T>>, StreamError> {
        if let Some(b) = self.store.lookup::<T>(node.id(), t) {
            return Ok(b);
        }
        let b = node.compute(t, self)?;
        self.store.memoize(node.id(), t, b.clone());
        Ok(b)
    }

    pub fn cached<T: Send + Sync + 'static>(&self, node: NodeId, t: u64) -> Option<Arc<MicroBatch<T>>> {
        self.store.lookup::<T>(node, t)
    }

    pub fn memoize<T: Send + Sync + 'static>(&self, node: NodeId, t: u64, batch: Arc<MicroBatch<T>>) {
        self.store.memoize(node, t, batch);
    }
}
