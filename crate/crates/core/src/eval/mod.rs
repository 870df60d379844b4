//! Synthetic ground truth, held-out trajectory cutting and the loss and
//! likelihood report.

mod cut;
mod report;
mod synthetic;

pub use cut::{concatenate_readings, cut_readings, cut_trajectories, cut_trip, segment_trip};
pub use report::{evaluate, BucketReport, EvalReport, MetricSummary, DURATION_BUCKETS_MIN};
pub use synthetic::{generate, Split, SyntheticData, SyntheticSpec, SyntheticTrip};
