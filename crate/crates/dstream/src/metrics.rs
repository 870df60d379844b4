use serde::{Deserialize, Serialize};

/// Per-interval scheduler measurements, one JSON line per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub interval: u64,
    pub interval_start_s: f64,
    pub records_in: usize,
    pub records_out: usize,
    /// Wall time spent computing every registered output for the interval.
    pub processing_time_s: f64,
    /// Time the batch waited behind the previous one after becoming available.
    pub queue_delay_s: f64,
    /// Completion later than availability + deadline.
    pub deadline_missed: bool,
    pub failures: usize,
}

/// Aggregate of a finished run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub intervals: u64,
    pub records_in: usize,
    pub records_out: usize,
    pub deadline_misses: usize,
    pub failures: usize,
    pub total_processing_time_s: f64,
    pub max_processing_time_s: f64,
}

impl RunSummary {
    pub fn from_metrics(metrics: &[BatchMetrics]) -> Self {
        let mut s = RunSummary::default();
        for m in metrics {
            s.intervals += 1;
            s.records_in += m.records_in;
            s.records_out += m.records_out;
            s.deadline_misses += usize::from(m.deadline_missed);
            s.failures += m.failures;
            s.total_processing_time_s += m.processing_time_s;
            s.max_processing_time_s = s.max_processing_time_s.max(m.processing_time_s);
        }
        s
    }

    /// Input records per second of processing time.
    pub fn throughput(&self) -> f64 {
        if self.total_processing_time_s > 0.0 {
            self.records_in as f64 / self.total_processing_time_s
        } else {
            f64::INFINITY
        }
    }
}
