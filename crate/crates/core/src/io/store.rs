use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{check_header, header_line, io_err, IoError};
use crate::decay::SECONDS_PER_DAY;
use crate::em::HistoricalSource;
use crate::network::Observation;

/// Local calendar day and time-of-day slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BucketKey {
    pub day: i64,
    pub slot: u32,
}

impl BucketKey {
    /// Day of the week, 0 for Monday.
    pub fn weekday(&self) -> u32 {
        // Day 0 (1970-01-01) was a Thursday.
        (self.day + 3).rem_euclid(7) as u32
    }
}

/// Observations bucketed by local day and time-of-day slot, optionally
/// persisted as `root/day-<d>/slot-<s>.jsonl`.
#[derive(Debug)]
pub struct HistoricalStore {
    slot_s: f64,
    utc_offset_s: i64,
    root: Option<PathBuf>,
    buckets: RwLock<BTreeMap<BucketKey, Vec<Observation>>>,
}

impl HistoricalStore {
    pub fn in_memory(slot_s: f64, utc_offset_s: i64) -> Self {
        assert!(slot_s > 0.0, "slot length must be positive");
        Self {
            slot_s,
            utc_offset_s,
            root: None,
            buckets: RwLock::new(BTreeMap::new()),
        }
    }

    /// Open (creating if needed) a store directory and load its buckets.
    pub fn open(root: &Path, slot_s: f64, utc_offset_s: i64) -> Result<Self, IoError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        let mut store = Self::in_memory(slot_s, utc_offset_s);
        let mut buckets = BTreeMap::new();
        for day_dir in std::fs::read_dir(root).map_err(io_err(root))? {
            let day_dir = day_dir.map_err(io_err(root))?.path();
            let Some(day) = parse_suffix(&day_dir, "day-", "") else { continue };
            for f in std::fs::read_dir(&day_dir).map_err(io_err(&day_dir))? {
                let f = f.map_err(io_err(&day_dir))?.path();
                let Some(slot) = parse_suffix(&f, "slot-", ".jsonl") else { continue };
                let key = BucketKey {
                    day,
                    slot: slot as u32,
                };
                buckets.insert(key, read_bucket(&f)?);
            }
        }
        store.buckets = RwLock::new(buckets);
        store.root = Some(root.to_path_buf());
        Ok(store)
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_s
    }

    pub fn key_for(&self, time: f64) -> BucketKey {
        let local = time + self.utc_offset_s as f64;
        let day = (local / SECONDS_PER_DAY).floor();
        let slot = ((local - day * SECONDS_PER_DAY) / self.slot_s).floor() as u32;
        BucketKey { day: day as i64, slot }
    }

    pub fn insert(&self, observations: Vec<Observation>) -> Result<(), IoError> {
        let mut by_key: BTreeMap<BucketKey, Vec<Observation>> = BTreeMap::new();
        for o in observations {
            by_key.entry(self.key_for(o.time)).or_default().push(o);
        }
        let mut buckets = self.buckets.write().unwrap();
        for (key, obs) in by_key {
            if let Some(root) = &self.root {
                append_bucket(root, key, &obs)?;
            }
            buckets.entry(key).or_default().extend(obs);
        }
        Ok(())
    }

    pub fn bucket(&self, key: BucketKey) -> Vec<Observation> {
        self.buckets.read().unwrap().get(&key).cloned().unwrap_or_default()
    }

    /// Everything stored under this weekday and slot, across all weeks.
    pub fn query(&self, weekday: u32, slot: u32) -> Vec<Observation> {
        self.buckets
            .read()
            .unwrap()
            .iter()
            .filter(|(k, _)| k.weekday() == weekday && k.slot == slot)
            .flat_map(|(_, v)| v.iter().cloned())
            .collect()
    }

    /// The same slot on the same weekday in each of the previous `weeks`
    /// weeks, for those buckets that exist.
    pub fn lookback(&self, key: BucketKey, weeks: u32) -> Vec<(BucketKey, Vec<Observation>)> {
        let buckets = self.buckets.read().unwrap();
        (1..=i64::from(weeks))
            .filter_map(|w| {
                let k = BucketKey {
                    day: key.day - 7 * w,
                    slot: key.slot,
                };
                buckets.get(&k).map(|v| (k, v.clone()))
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.read().unwrap().values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl HistoricalSource for HistoricalStore {
    fn observations_between(&self, from: f64, to: f64) -> Vec<Observation> {
        if from > to {
            return Vec::new();
        }
        let (lo, hi) = (self.key_for(from), self.key_for(to));
        self.buckets
            .read()
            .unwrap()
            .range(lo..=hi)
            .flat_map(|(_, v)| v.iter().filter(|o| o.time >= from && o.time <= to).cloned())
            .collect()
    }

    fn append(&mut self, batch: Vec<Observation>) -> Result<(), IoError> {
        self.insert(batch)
    }
}

fn parse_suffix(path: &Path, prefix: &str, suffix: &str) -> Option<i64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix(prefix)?.strip_suffix(suffix)?.parse().ok()
}

fn bucket_path(root: &Path, key: BucketKey) -> PathBuf {
    root.join(format!("day-{}", key.day)).join(format!("slot-{}.jsonl", key.slot))
}

fn append_bucket(root: &Path, key: BucketKey, obs: &[Observation]) -> Result<(), IoError> {
    let path = bucket_path(root, key);
    let dir = path.parent().expect("bucket path has a parent");
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    if fresh {
        writeln!(out, "{}", header_line("observations")).map_err(io_err(&path))?;
    }
    for o in obs {
        writeln!(out, "{}", serde_json::to_string(o).expect("observation serializes")).map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

fn read_bucket(path: &Path) -> Result<Vec<Observation>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Some(h) = check_header(&line, path) {
                h?;
                continue;
            }
        }
        out.push(serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::SECONDS_PER_WEEK;
    use std::sync::Arc;

    fn obs(id: &str, time: f64) -> Observation {
        Observation {
            id: Arc::from(id),
            weights: vec![(0, 0.25), (3, 1.0 / 3.0)],
            duration_s: 17.125,
            time,
        }
    }

    #[test]
    fn weekday_convention() {
        // 1970-01-05 was a Monday.
        assert_eq!(BucketKey { day: 4, slot: 0 }.weekday(), 0);
        assert_eq!(BucketKey { day: 0, slot: 0 }.weekday(), 3);
        assert_eq!(BucketKey { day: -1, slot: 0 }.weekday(), 2);
    }

    #[test]
    fn store_then_query_and_isolation() {
        let s = HistoricalStore::in_memory(1200.0, 0);
        let t = 4.0 * SECONDS_PER_DAY + 3600.0;
        s.insert(vec![obs("a", t), obs("b", t + 10.0), obs("c", t + 1200.0)]).unwrap();
        let key = s.key_for(t);
        assert_eq!(key, BucketKey { day: 4, slot: 3 });
        let got: Vec<_> = s.query(0, 3).iter().map(|o| o.id.to_string()).collect();
        assert_eq!(got, vec!["a", "b"]);
        assert_eq!(s.query(0, 4).len(), 1);
        assert!(s.query(1, 3).is_empty());
        assert!(s.bucket(BucketKey { day: 99, slot: 0 }).is_empty());
    }

    #[test]
    fn lookback_is_bounded_by_weeks() {
        let s = HistoricalStore::in_memory(600.0, 0);
        let now = 20.0 * SECONDS_PER_WEEK + 500.0;
        for w in 1..=12 {
            s.insert(vec![obs(&format!("w{w}"), now - w as f64 * SECONDS_PER_WEEK)]).unwrap();
        }
        let got = s.lookback(s.key_for(now), 10);
        assert_eq!(got.len(), 10);
        assert_eq!(s.lookback(s.key_for(now), 3).len(), 3);
    }

    #[test]
    fn persisted_buckets_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let items = [obs("a", 100.0), obs("b", 5000.0), obs("c", 200.0)];
        {
            let s = HistoricalStore::open(dir.path(), 1200.0, 0).unwrap();
            s.insert(items[..2].to_vec()).unwrap();
            s.insert(items[2..].to_vec()).unwrap();
        }
        let s = HistoricalStore::open(dir.path(), 1200.0, 0).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.bucket(s.key_for(100.0)), vec![items[0].clone(), items[2].clone()]);
        assert_eq!(s.bucket(s.key_for(5000.0)), vec![items[1].clone()]);
    }

    #[test]
    fn range_query_filters_by_time() {
        let s = HistoricalStore::in_memory(60.0, 3600);
        s.insert((0..100).map(|i| obs(&i.to_string(), i as f64 * 30.0)).collect()).unwrap();
        let got = s.observations_between(300.0, 600.0);
        assert_eq!(got.len(), 11);
        assert!(got.iter().all(|o| (300.0..=600.0).contains(&o.time)));
    }
}
