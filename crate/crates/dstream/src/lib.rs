//! A small micro-batch stream runtime.
//!
//! A stream is a series of immutable per-interval datasets ([`MicroBatch`]).
//! Each interval's dataset is computed from the source batches of that
//! interval (and, for stateful operators, earlier intervals) by deterministic
//! operators executed over a fixed number of shards on a worker pool.
//!
//! ```
//! use std::time::Duration;
//! use dstream::{SchedulerConfig, StreamingContext, VecSource};
//!
//! let cfg = SchedulerConfig::new(Duration::from_secs(1));
//! let mut ctx = StreamingContext::new(cfg).unwrap();
//! let views = ctx.source(VecSource::new(
//!     vec![vec!["a", "a", "b"], vec!["a"]],
//!     Duration::from_secs(1),
//! ));
//! let counts = views.map(|url| (url.to_string(), 1u64)).running_reduce(|a, b| a + b);
//! let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
//! let sink = seen.clone();
//! ctx.for_each_batch(&counts, move |batch| {
//!     let mut out = batch.to_vec();
//!     out.sort();
//!     sink.lock().unwrap().push(out);
//!     Ok::<_, String>(())
//! });
//! ctx.run().unwrap();
//! let seen = seen.lock().unwrap();
//! assert_eq!(seen[1], vec![("a".to_string(), 3), ("b".to_string(), 1)]);
//! ```

mod batch;
mod context;
mod error;
mod hash;
mod metrics;
mod node;
mod pool;
mod source;
mod stream;

pub use batch::MicroBatch;
pub use context::{ClockMode, SchedulerConfig, StreamingContext};
pub use error::StreamError;
pub use hash::{stable_hash, StableHasher};
pub use metrics::{BatchMetrics, RunSummary};
pub use pool::WorkerPool;
pub use source::{BatchSource, SourceBatch, VecSource};
pub use stream::DStream;
