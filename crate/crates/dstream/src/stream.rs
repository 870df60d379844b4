use std::any::Any;
use std::collections::HashMap;
use std::hash::Hash;
use std::marker::PhantomData;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use crate::hash::shard_of;
use crate::node::{is_active, Exec, GraphMeta, Node, NodeId};
use crate::{MicroBatch, StreamError};

/// Handle to a node of the operator graph whose per-interval output is a
/// [`MicroBatch<T>`].
///
/// Building operators only extends the graph; nothing runs until
/// [`crate::StreamingContext::run`].
pub struct DStream<T> {
    pub(crate) node: Arc<dyn Node<T>>,
    pub(crate) meta: Arc<GraphMeta>,
}

impl<T> Clone for DStream<T> {
    fn clone(&self) -> Self {
        Self {
            node: self.node.clone(),
            meta: self.meta.clone(),
        }
    }
}

impl<T> std::fmt::Debug for DStream<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DStream")
            .field("node", &self.node.id())
            .field("slide", &self.node.slide())
            .finish()
    }
}

fn panic_message(payload: Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn guarded<R>(operator: &'static str, interval: u64, f: impl FnOnce() -> R) -> Result<R, StreamError> {
    catch_unwind(AssertUnwindSafe(f)).map_err(|p| StreamError::UserFunction {
        operator,
        interval,
        message: panic_message(p),
    })
}

pub(crate) struct SourceNode<T> {
    pub id: NodeId,
    pub _t: PhantomData<fn() -> T>,
}

impl<T: Send + Sync + 'static> Node<T> for SourceNode<T> {
    fn id(&self) -> NodeId {
        self.id
    }

    fn slide(&self) -> u64 {
        1
    }

    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<T>>, StreamError> {
        exec.store
            .source::<T>(self.id, t)
            .ok_or(StreamError::Unavailable { node: self.id, interval: t })
    }
}

type ShardFn<T, U> = dyn Fn(&[T]) -> Vec<U> + Send + Sync;

/// Stateless shard-preserving operator (map, flat_map, filter).
struct ShardMapNode<T, U> {
    id: NodeId,
    name: &'static str,
    parent: Arc<dyn Node<T>>,
    f: Box<ShardFn<T, U>>,
}

impl<T, U> Node<U> for ShardMapNode<T, U>
where
    T: Send + Sync + 'static,
    U: Send + Sync + 'static,
{
    fn id(&self) -> NodeId {
        self.id
    }

    fn slide(&self) -> u64 {
        self.parent.slide()
    }

    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<U>>, StreamError> {
        let input = exec.get(self.parent.as_ref(), t)?;
        let shards = input
            .shards()
            .par_iter()
            .map(|s| guarded(self.name, t, || (self.f)(s)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Arc::new(MicroBatch::from_shards(t, input.start(), input.length(), shards)))
    }
}

/// Re-partition `(K, V)` records so that every key lands in the shard given
/// by its stable hash. Output shard `j` lists records in input-shard order.
fn repartition<K, V>(input: &MicroBatch<(K, V)>, shards: usize) -> Vec<Vec<(K, V)>>
where
    K: Hash + Clone + Send + Sync,
    V: Clone + Send + Sync,
{
    let scattered: Vec<Vec<Vec<(K, V)>>> = input
        .shards()
        .par_iter()
        .map(|s| {
            let mut out: Vec<Vec<(K, V)>> = (0..shards).map(|_| Vec::new()).collect();
            for (k, v) in s {
                out[shard_of(k, shards)].push((k.clone(), v.clone()));
            }
            out
        })
        .collect();
    (0..shards)
        .map(|j| scattered.iter().flat_map(|per| per[j].iter().cloned()).collect())
        .collect()
}

struct GroupByKeyNode<K, V> {
    id: NodeId,
    parent: Arc<dyn Node<(K, V)>>,
    shards: usize,
}

impl<K, V> Node<(K, Vec<V>)> for GroupByKeyNode<K, V>
where
    K: Hash + Eq + Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
{
    fn id(&self) -> NodeId {
        self.id
    }

    fn slide(&self) -> u64 {
        self.parent.slide()
    }

    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<(K, Vec<V>)>>, StreamError> {
        let input = exec.get(self.parent.as_ref(), t)?;
        let parts = repartition(&input, self.shards);
        let grouped = parts
            .into_par_iter()
            .map(|part| {
                let mut index: HashMap<K, usize> = HashMap::new();
                let mut groups: Vec<(K, Vec<V>)> = Vec::new();
                for (k, v) in part {
                    match index.get(&k) {
                        Some(&i) => groups[i].1.push(v),
                        None => {
                            index.insert(k.clone(), groups.len());
                            groups.push((k, vec![v]));
                        }
                    }
                }
                groups
            })
            .collect();
        Ok(Arc::new(MicroBatch::from_shards(t, input.start(), input.length(), grouped)))
    }
}

type Combiner<V> = dyn Fn(&V, &V) -> V + Send + Sync;

struct RunningReduceNode<K, V> {
    id: NodeId,
    parent: Arc<dyn Node<(K, V)>>,
    shards: usize,
    op: Arc<Combiner<V>>,
}

impl<K, V> RunningReduceNode<K, V>
where
    K: Hash + Eq + Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
{
    fn step(
        &self,
        t: u64,
        prev: Option<&MicroBatch<(K, V)>>,
        exec: &Exec<'_>,
    ) -> Result<Arc<MicroBatch<(K, V)>>, StreamError> {
        let input = exec.get(self.parent.as_ref(), t)?;
        let parts = repartition(&input, self.shards);
        let op = &self.op;
        let merged = parts
            .into_par_iter()
            .enumerate()
            .map(|(j, part)| {
                guarded("running_reduce", t, || {
                    let mut index: HashMap<K, usize> = HashMap::new();
                    let mut state: Vec<(K, V)> = Vec::new();
                    if let Some(prev) = prev {
                        for (k, v) in &prev.shards()[j] {
                            index.insert(k.clone(), state.len());
                            state.push((k.clone(), v.clone()));
                        }
                    }
                    for (k, v) in part {
                        match index.get(&k) {
                            Some(&i) => state[i].1 = op(&state[i].1, &v),
                            None => {
                                index.insert(k.clone(), state.len());
                                state.push((k, v));
                            }
                        }
                    }
                    state
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Arc::new(MicroBatch::from_shards(t, input.start(), input.length(), merged)))
    }
}

impl<K, V> Node<(K, V)> for RunningReduceNode<K, V>
where
    K: Hash + Eq + Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
{
    fn id(&self) -> NodeId {
        self.id
    }

    fn slide(&self) -> u64 {
        self.parent.slide()
    }

    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<(K, V)>>, StreamError> {
        // The state at t is the output at the previous active interval; walk
        // back to the latest memoized one and roll forward from there.
        let slide = self.slide();
        let mut pending = vec![t];
        let mut base = None;
        let mut cursor = t;
        while cursor >= slide {
            cursor -= slide;
            if let Some(b) = exec.cached::<(K, V)>(self.id, cursor) {
                base = Some(b);
                break;
            }
            pending.push(cursor);
        }
        let mut prev = base;
        let mut last = None;
        for &step_t in pending.iter().rev() {
            let out = self.step(step_t, prev.as_deref(), exec)?;
            if step_t != t {
                exec.memoize(self.id, step_t, out.clone());
            }
            prev = Some(out.clone());
            last = Some(out);
        }
        Ok(last.expect("pending always holds t"))
    }
}

struct WindowNode<T> {
    id: NodeId,
    parent: Arc<dyn Node<T>>,
    length: u64,
    slide: u64,
}

impl<T: Clone + Send + Sync + 'static> Node<T> for WindowNode<T> {
    fn id(&self) -> NodeId {
        self.id
    }

    fn slide(&self) -> u64 {
        self.slide
    }

    fn compute(&self, t: u64, exec: &Exec<'_>) -> Result<Arc<MicroBatch<T>>, StreamError> {
        let parent_slide = self.parent.slide();
        let first = (t + 1).saturating_sub(self.length);
        let mut inputs = Vec::new();
        for i in first..=t {
            if is_active(parent_slide, i) {
                inputs.push(exec.get(self.parent.as_ref(), i)?);
            }
        }
        let shards = exec.meta.shards;
        let out = (0..shards)
            .into_par_iter()
            .map(|j| inputs.iter().flat_map(|b| b.shards()[j].iter().cloned()).collect())
            .collect();
        let start = exec.interval_start(first);
        let length = exec.meta.interval * u32::try_from(self.length).unwrap_or(u32::MAX);
        Ok(Arc::new(MicroBatch::from_shards(t, start, length, out)))
    }
}

impl<T: Send + Sync + 'static> DStream<T> {
    fn derive<U: Send + Sync + 'static>(&self, node: Arc<dyn Node<U>>) -> DStream<U> {
        DStream {
            node,
            meta: self.meta.clone(),
        }
    }

    fn shard_op<U, F>(&self, name: &'static str, f: F) -> DStream<U>
    where
        U: Send + Sync + 'static,
        F: Fn(&[T]) -> Vec<U> + Send + Sync + 'static,
    {
        self.derive(Arc::new(ShardMapNode {
            id: self.meta.allocate(),
            name,
            parent: self.node.clone(),
            f: Box::new(f),
        }))
    }

    /// Apply `f` to every record.
    pub fn map<U, F>(&self, f: F) -> DStream<U>
    where
        U: Send + Sync + 'static,
        F: Fn(&T) -> U + Send + Sync + 'static,
    {
        self.shard_op("map", move |s| s.iter().map(&f).collect())
    }

    pub fn flat_map<U, I, F>(&self, f: F) -> DStream<U>
    where
        U: Send + Sync + 'static,
        I: IntoIterator<Item = U>,
        F: Fn(&T) -> I + Send + Sync + 'static,
    {
        self.shard_op("flat_map", move |s| s.iter().flat_map(&f).collect())
    }

    pub fn filter<F>(&self, f: F) -> DStream<T>
    where
        T: Clone,
        F: Fn(&T) -> bool + Send + Sync + 'static,
    {
        self.shard_op("filter", move |s| s.iter().filter(|r| f(r)).cloned().collect())
    }

    /// Sliding window over the last `length` of input, emitted every `slide`.
    ///
    /// Both durations must be positive multiples of this stream's slide.
    pub fn window(&self, length: Duration, slide: Duration) -> Result<DStream<T>, StreamError>
    where
        T: Clone,
    {
        let base = self.meta.interval.as_nanos();
        let parent_slide = u128::from(self.node.slide());
        let step = base * parent_slide;
        let (len_ns, slide_ns) = (length.as_nanos(), slide.as_nanos());
        if len_ns == 0 || slide_ns == 0 || len_ns % step != 0 || slide_ns % step != 0 {
            return Err(StreamError::Config(format!(
                "window length {length:?} and slide {slide:?} must be positive multiples of {:?}",
                Duration::from_nanos(u64::try_from(step).unwrap_or(u64::MAX))
            )));
        }
        let length = u64::try_from(len_ns / base).expect("window length overflow");
        let slide = u64::try_from(slide_ns / base).expect("window slide overflow");
        self.meta.require_lookback(length);
        Ok(self.derive(Arc::new(WindowNode {
            id: self.meta.allocate(),
            parent: self.node.clone(),
            length,
            slide,
        })))
    }

    /// Number of base intervals between two outputs of this stream.
    pub fn slide_intervals(&self) -> u64 {
        self.node.slide()
    }
}

impl<K, V> DStream<(K, V)>
where
    K: Hash + Eq + Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
{
    /// Group each interval's values by key. Shard `j` of the output holds
    /// exactly the keys whose stable hash maps to `j`.
    pub fn group_by_key(&self) -> DStream<(K, Vec<V>)> {
        self.derive(Arc::new(GroupByKeyNode {
            id: self.meta.allocate(),
            parent: self.node.clone(),
            shards: self.meta.shards,
        }))
    }

    /// Per-key fold of every value seen so far. `op` must be associative and
    /// commutative; the output at each interval is the whole running state.
    pub fn running_reduce<F>(&self, op: F) -> DStream<(K, V)>
    where
        F: Fn(&V, &V) -> V + Send + Sync + 'static,
    {
        self.meta.require_lookback(self.node.slide() + 1);
        self.derive(Arc::new(RunningReduceNode {
            id: self.meta.allocate(),
            parent: self.node.clone(),
            shards: self.meta.shards,
            op: Arc::new(op),
        }))
    }
}
