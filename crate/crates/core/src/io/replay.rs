use std::path::{Path, PathBuf};
use std::time::Duration;

use dstream::{BatchSource, SourceBatch, StreamError};

use super::{read_trajectories, IoError, TrajectoryReader};
use crate::network::TrajectoryMeasurement;

pub const DEFAULT_RECORD_CAP: usize = 1_000_000;

/// A recorded trajectory feed replayed as fixed-interval batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySource {
    pub path: PathBuf,
    /// Replay speed relative to the recorded timeline.
    pub rate_multiplier: f64,
    pub interval_s: f64,
}

impl ReplaySource {
    pub fn open(&self) -> Result<ReplayBatches, IoError> {
        let reader = read_trajectories(&self.path)?;
        ReplayBatches::new(Feed::File(reader), &self.path, self.interval_s, self.rate_multiplier)
    }
}

enum Feed {
    File(TrajectoryReader),
    Memory(std::vec::IntoIter<TrajectoryMeasurement>),
}

impl Feed {
    fn next(&mut self) -> Option<Result<TrajectoryMeasurement, IoError>> {
        match self {
            Feed::File(r) => r.next(),
            Feed::Memory(it) => it.next().map(Ok),
        }
    }
}

/// Batches of a replayed feed. Batch `b` holds the records starting in
/// `[origin + b*interval, origin + (b+1)*interval)`, where `origin` is the
/// first record's start time rounded down to a multiple of the interval,
/// and becomes available `(b+1)*interval/rate` after replay starts. Gaps
/// produce empty batches.
pub struct ReplayBatches {
    feed: Feed,
    path: PathBuf,
    interval_s: f64,
    rate: f64,
    record_cap: usize,
    origin: Option<f64>,
    peeked: Option<TrajectoryMeasurement>,
    batch: u64,
    index: usize,
    last_time: f64,
    finished: bool,
}

impl ReplayBatches {
    fn new(feed: Feed, path: &Path, interval_s: f64, rate: f64) -> Result<Self, IoError> {
        if !(interval_s > 0.0 && interval_s.is_finite()) {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                message: format!("replay interval must be positive, got {interval_s}"),
            });
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                message: format!("rate_multiplier must be positive, got {rate}"),
            });
        }
        let mut out = Self {
            feed,
            path: path.to_path_buf(),
            interval_s,
            rate,
            record_cap: DEFAULT_RECORD_CAP,
            origin: None,
            peeked: None,
            batch: 0,
            index: 0,
            last_time: f64::NEG_INFINITY,
            finished: false,
        };
        out.peeked = out.pull()?;
        out.origin = out.peeked.as_ref().map(|r| (r.start_time / interval_s).floor() * interval_s);
        Ok(out)
    }

    /// Replay in-memory records, which must be sorted by start time.
    pub fn from_records(records: Vec<TrajectoryMeasurement>, interval_s: f64, rate: f64) -> Result<Self, IoError> {
        Self::new(Feed::Memory(records.into_iter()), Path::new("<memory>"), interval_s, rate)
    }

    pub fn with_record_cap(mut self, cap: usize) -> Self {
        self.record_cap = cap;
        self
    }

    /// Start of batch 0 on the recorded timeline; `None` for an empty feed.
    pub fn origin(&self) -> Option<f64> {
        self.origin
    }

    /// Malformed lines skipped so far.
    pub fn skipped(&self) -> usize {
        match &self.feed {
            Feed::File(r) => r.skipped(),
            Feed::Memory(_) => 0,
        }
    }

    fn pull(&mut self) -> Result<Option<TrajectoryMeasurement>, IoError> {
        match self.feed.next() {
            None => Ok(None),
            Some(Err(e)) => Err(e),
            Some(Ok(r)) => {
                if r.start_time < self.last_time {
                    return Err(IoError::Unsorted {
                        path: self.path.clone(),
                        index: self.index,
                        time: r.start_time,
                    });
                }
                self.last_time = r.start_time;
                self.index += 1;
                Ok(Some(r))
            }
        }
    }

    /// Next batch as `(batch index, records)`, or `None` after the last
    /// record has been emitted.
    pub fn next_records(&mut self) -> Option<Result<(u64, Vec<TrajectoryMeasurement>), IoError>> {
        if self.finished {
            return None;
        }
        let origin = self.origin?;
        if self.peeked.is_none() {
            self.finished = true;
            return None;
        }
        let b = self.batch;
        let end = origin + (b + 1) as f64 * self.interval_s;
        let mut records = Vec::new();
        while let Some(r) = self.peeked.take() {
            if r.start_time >= end {
                self.peeked = Some(r);
                break;
            }
            if records.len() == self.record_cap {
                self.finished = true;
                return Some(Err(IoError::Invalid {
                    path: self.path.clone(),
                    message: format!("batch {b} exceeds the record cap of {}", self.record_cap),
                }));
            }
            records.push(r);
            match self.pull() {
                Ok(next) => self.peeked = next,
                Err(e) => {
                    self.finished = true;
                    return Some(Err(e));
                }
            }
        }
        self.batch += 1;
        Some(Ok((b, records)))
    }

    pub fn available_at(&self, batch: u64) -> Duration {
        Duration::from_secs_f64((batch + 1) as f64 * self.interval_s / self.rate)
    }
}

impl BatchSource<TrajectoryMeasurement> for ReplayBatches {
    fn next_batch(&mut self) -> Option<Result<SourceBatch<TrajectoryMeasurement>, StreamError>> {
        let item = self.next_records()?;
        Some(match item {
            Ok((b, records)) => Ok(SourceBatch {
                records,
                available_at: self.available_at(b),
            }),
            Err(e) => Err(StreamError::Source {
                interval: self.batch,
                message: e.to_string(),
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> TrajectoryMeasurement {
        TrajectoryMeasurement {
            id: format!("r{t}"),
            start_time: t,
            duration_s: 1.0,
            path: vec!["a".into()],
            offset_start_m: 0.0,
            offset_end_m: 1.0,
        }
    }

    fn batches(times: &[f64], interval: f64, rate: f64) -> Vec<(u64, Vec<f64>, Duration)> {
        let mut r = ReplayBatches::from_records(times.iter().map(|&t| rec(t)).collect(), interval, rate).unwrap();
        let mut out = Vec::new();
        while let Some(b) = r.next_batch() {
            let b = b.unwrap();
            out.push((out.len() as u64, b.records.iter().map(|r| r.start_time).collect(), b.available_at));
        }
        out
    }

    #[test]
    fn ten_seconds_into_two_batches() {
        let times: Vec<f64> = (0..10).map(|i| 100.0 + i as f64).collect();
        let b = batches(&times, 5.0, 1.0);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].1, vec![100.0, 101.0, 102.0, 103.0, 104.0]);
        assert_eq!(b[1].2, Duration::from_secs(10));
    }

    #[test]
    fn rate_changes_timing_only() {
        let times: Vec<f64> = (0..10).map(|i| 100.0 + i as f64).collect();
        let slow = batches(&times, 5.0, 1.0);
        let fast = batches(&times, 5.0, 10.0);
        assert_eq!(fast.len(), slow.len());
        for (s, f) in slow.iter().zip(&fast) {
            assert_eq!(s.1, f.1);
            assert_eq!(f.2 * 10, s.2);
        }
    }

    #[test]
    fn gaps_give_empty_batches() {
        let b = batches(&[3.0, 4.0, 21.0], 5.0, 1.0);
        let sizes: Vec<usize> = b.iter().map(|x| x.1.len()).collect();
        assert_eq!(sizes, vec![2, 0, 0, 0, 1]);
    }

    #[test]
    fn unsorted_input_names_index() {
        let err = ReplayBatches::from_records(vec![rec(1.0), rec(2.0), rec(1.5)], 5.0, 1.0).and_then(|mut r| {
            while let Some(b) = r.next_records() {
                b?;
            }
            Ok(())
        });
        assert!(matches!(err, Err(IoError::Unsorted { index: 2, .. })), "{err:?}");
    }

    #[test]
    fn record_cap_enforced() {
        let mut r = ReplayBatches::from_records((0..5).map(|i| rec(i as f64)).collect(), 10.0, 1.0)
            .unwrap()
            .with_record_cap(3);
        assert!(r.next_records().unwrap().is_err());
        assert!(r.next_records().is_none());
    }

    #[test]
    fn empty_feed() {
        let mut r = ReplayBatches::from_records(Vec::new(), 5.0, 1.0).unwrap();
        assert!(r.origin().is_none());
        assert!(r.next_batch().is_none());
        assert!(ReplayBatches::from_records(Vec::new(), 0.0, 1.0).is_err());
    }
}
