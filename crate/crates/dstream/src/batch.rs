use std::time::Duration;

/// The sealed dataset of one interval, split into a fixed number of shards.
///
/// There is no mutable access to the records once a batch is built.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroBatch<T> {
    interval: u64,
    start: Duration,
    length: Duration,
    shards: Vec<Vec<T>>,
}

impl<T> MicroBatch<T> {
    pub(crate) fn from_shards(interval: u64, start: Duration, length: Duration, shards: Vec<Vec<T>>) -> Self {
        debug_assert!(!shards.is_empty());
        Self {
            interval,
            start,
            length,
            shards,
        }
    }

    /// Partition `records` over `shards` by position.
    pub(crate) fn round_robin(interval: u64, start: Duration, length: Duration, records: Vec<T>, shards: usize) -> Self {
        let mut out: Vec<Vec<T>> = (0..shards).map(|_| Vec::new()).collect();
        for (i, r) in records.into_iter().enumerate() {
            out[i % shards].push(r);
        }
        Self::from_shards(interval, start, length, out)
    }

    pub(crate) fn keyed(
        interval: u64,
        start: Duration,
        length: Duration,
        records: Vec<T>,
        shards: usize,
        key: &dyn Fn(&T) -> u64,
    ) -> Self {
        let mut out: Vec<Vec<T>> = (0..shards).map(|_| Vec::new()).collect();
        for r in records {
            let s = (key(&r) % shards as u64) as usize;
            out[s].push(r);
        }
        Self::from_shards(interval, start, length, out)
    }

    /// Index of the interval this batch belongs to (0-based).
    pub fn interval(&self) -> u64 {
        self.interval
    }

    /// Logical start of the interval relative to the stream epoch.
    pub fn start(&self) -> Duration {
        self.start
    }

    pub fn length(&self) -> Duration {
        self.length
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.iter().all(Vec::is_empty)
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[Vec<T>] {
        &self.shards
    }

    /// All records, shard by shard.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.shards.iter().flatten()
    }

    pub fn to_vec(&self) -> Vec<T>
    where
        T: Clone,
    {
        self.iter().cloned().collect()
    }
}
