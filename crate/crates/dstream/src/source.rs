use std::collections::VecDeque;
use std::time::Duration;

use crate::StreamError;

/// The records of one interval as delivered by a source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBatch<T> {
    pub records: Vec<T>,
    /// Offset from the start of the run at which the interval is complete
    /// and may be processed.
    pub available_at: Duration,
}

/// A producer of consecutive interval batches, starting at interval 0.
pub trait BatchSource<T>: Send {
    /// `None` once the source is exhausted.
    fn next_batch(&mut self) -> Option<Result<SourceBatch<T>, StreamError>>;
}

/// In-memory source: batch `i` becomes available at `(i + 1) * interval`.
#[derive(Debug, Clone)]
pub struct VecSource<T> {
    batches: VecDeque<Vec<T>>,
    interval: Duration,
    next: u32,
}

impl<T> VecSource<T> {
    pub fn new(batches: Vec<Vec<T>>, interval: Duration) -> Self {
        Self {
            batches: batches.into(),
            interval,
            next: 0,
        }
    }
}

impl<T: Send> BatchSource<T> for VecSource<T> {
    fn next_batch(&mut self) -> Option<Result<SourceBatch<T>, StreamError>> {
        let records = self.batches.pop_front()?;
        self.next += 1;
        Some(Ok(SourceBatch {
            records,
            available_at: self.interval * self.next,
        }))
    }
}
