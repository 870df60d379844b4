//! Run configuration: named profiles, a TOML file and `key=value` overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use dstream::{ClockMode, SchedulerConfig};
use serde::{Deserialize, Serialize};
use traffic_core::em::EmConfig;
use traffic_core::eval::SyntheticSpec;
use traffic_core::{DecayConfig, PriorConfig};

use crate::CliError;

/// Environment variable overriding `scheduler.workers`.
pub const WORKERS_ENV: &str = "TRAFFIC_EM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 10 weeks of history, 2 h window, 100 samples, 5 iterations, 20 min steps.
    #[default]
    SlidingBig,
    /// SlidingBig with a 40 min window.
    SlidingBig1,
    /// SlidingBig using only the last 10 days, i.e. one week back.
    SlidingBig2,
    /// SlidingBig with one iteration every 4 min.
    SlidingBig3,
    /// SlidingBig with 10 samples per observation.
    SlidingBig4,
    /// Online estimation merging new data every 5 s.
    Streaming,
}

impl Profile {
    pub fn config(self) -> RunConfig {
        let mut c = RunConfig {
            profile: self,
            ..RunConfig::default()
        };
        match self {
            Profile::SlidingBig => {}
            Profile::SlidingBig1 => c.set_day_window(2400.0),
            Profile::SlidingBig2 => c.set_weeks(1),
            Profile::SlidingBig3 => {
                c.em.num_iterations = 1;
                c.set_step(240.0);
            }
            Profile::SlidingBig4 => c.em.num_samples = 10,
            Profile::Streaming => {
                c.em.num_samples = 10;
                c.em.num_iterations = 1;
                c.set_day_window(1200.0);
                c.set_weeks(1);
                c.set_step(5.0);
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub network: PathBuf,
    /// Training feed, sorted by start time.
    pub trajectories: PathBuf,
    /// Held-out pieces scored by `evaluate`.
    pub test_pieces: PathBuf,
    /// Generator parameters, in the estimate file format.
    pub truth: PathBuf,
    pub estimates: PathBuf,
    /// Second estimate file for a side-by-side evaluation; empty to skip.
    pub compare_estimates: PathBuf,
    pub metrics: PathBuf,
    /// Report files are written as `<report>.json` and `<report>.csv`.
    pub report: PathBuf,
    /// Directory persisting the historical store; empty keeps it in memory.
    pub store: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            network: "network.csv".into(),
            trajectories: "trajectories.jsonl".into(),
            test_pieces: "test_pieces.jsonl".into(),
            truth: "truth.jsonl".into(),
            estimates: "estimates.jsonl".into(),
            compare_estimates: PathBuf::new(),
            metrics: "metrics.jsonl".into(),
            report: "report".into(),
            store: PathBuf::new(),
        }
    }
}

/// Optional path: empty means unset.
pub fn given(p: &Path) -> Option<&Path> {
    (!p.as_os_str().is_empty()).then_some(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerSettings {
    /// Batch interval on the recorded timeline; must equal `em.time_step_s`.
    pub interval_s: f64,
    /// Allowed latency per batch, in recorded time.
    pub deadline_s: f64,
    pub workers: usize,
    pub shards: usize,
    pub clock: ClockMode,
}

impl Default for SchedulerSettings {
    fn default() -> Self {
        Self {
            interval_s: 1200.0,
            deadline_s: 1200.0,
            workers: 1,
            shards: 8,
            clock: ClockMode::Virtual,
        }
    }
}

impl SchedulerSettings {
    /// Scheduler settings for a replay `rate` times faster than recorded,
    /// with the deadline compressed accordingly.
    pub fn scheduler(&self, rate: f64) -> SchedulerConfig {
        SchedulerConfig {
            interval: Duration::from_secs_f64(self.interval_s),
            deadline: Duration::from_secs_f64(self.deadline_s / rate),
            workers: self.workers,
            shards: self.shards,
            clock: self.clock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    /// Disjoint runs of whole links with partial end links.
    Segments,
    /// Consecutive pieces of fixed duration, like periodic position fixes.
    Readings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSettings {
    pub feed: FeedKind,
    /// Segment length bound for the `segments` feed.
    pub max_links: usize,
    /// Piece length for the `readings` feed.
    pub reading_s: f64,
    /// Held-out trips are cut into pieces of each of these durations.
    pub piece_lengths_s: Vec<f64>,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            feed: FeedKind::Segments,
            max_links: 2,
            reading_s: 60.0,
            piece_lengths_s: vec![60.0, 300.0, 600.0, 1200.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSettings {
    /// Intervals replayed per trial.
    pub horizon_intervals: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    /// Bisection steps on the log rate.
    pub rounds: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            horizon_intervals: 100,
            rate_min: 1.0,
            rate_max: 1000.0,
            rounds: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Replay speed relative to the recorded timeline.
    pub rate_multiplier: f64,
    pub paths: Paths,
    pub em: EmConfig,
    pub decay: DecayConfig,
    pub prior: PriorConfig,
    pub scheduler: SchedulerSettings,
    pub synthetic: SyntheticSpec,
    pub simulate: SimulateSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: Profile::SlidingBig,
            seed: 1,
            rate_multiplier: 1.0,
            paths: Paths::default(),
            em: EmConfig::default(),
            decay: DecayConfig::default(),
            prior: PriorConfig::default(),
            scheduler: SchedulerSettings::default(),
            synthetic: SyntheticSpec::default(),
            simulate: SimulateSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

impl RunConfig {
    fn set_day_window(&mut self, s: f64) {
        self.em.day_window_s = s;
        self.decay.day_window_s = s;
    }

    fn set_weeks(&mut self, w: u32) {
        self.em.weeks_lookback = w;
        self.decay.week_window_count = w;
    }

    fn set_step(&mut self, s: f64) {
        self.em.time_step_s = s;
        self.scheduler.interval_s = s;
        self.scheduler.deadline_s = s;
    }

    /// Resolve a configuration: the profile's defaults, then `file`, then
    /// `workers_env`, then each `key=value` in `sets`. A profile given on the
    /// command line wins over one named in the file.
    pub fn load(
        file: Option<&Path>,
        profile: Option<Profile>,
        workers_env: Option<&str>,
        sets: &[String],
    ) -> Result<Self, CliError> {
        let mut doc = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let named = match doc.get("profile") {
            Some(v) => Some(
                Profile::deserialize(v.clone()).map_err(|e| CliError::Config(format!("profile: {e}")))?,
            ),
            None => None,
        };
        let profile = profile.or(named).unwrap_or_default();
        doc.insert("profile".into(), toml::Value::try_from(profile).expect("profile serializes"));
        let mut merged = toml::Table::try_from(profile.config()).expect("config serializes");
        merge(&mut merged, doc);
        if let Some(w) = workers_env {
            let n: i64 = w
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{WORKERS_ENV}: not an integer: {w:?}")))?;
            set_path(&mut merged, "scheduler.workers", toml::Value::Integer(n))?;
        }
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set {s:?}: expected key=value")))?;
            set_path(&mut merged, key.trim(), parse_value(raw.trim()))?;
        }
        // Round-trip through text so errors point at the offending key.
        let text = toml::to_string(&merged).expect("table serializes");
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |section: &'static str| move |e: String| CliError::Config(format!("{section}.{e}"));
        self.em.validate().map_err(field("em"))?;
        self.decay.validate().map_err(field("decay"))?;
        self.prior.validate().map_err(field("prior"))?;
        self.synthetic.validate().map_err(field("synthetic"))?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.to_string())) };
        check(
            self.rate_multiplier > 0.0 && self.rate_multiplier.is_finite(),
            "rate_multiplier must be positive",
        )?;
        check(
            self.decay.day_window_s == self.em.day_window_s,
            "decay.day_window_s must equal em.day_window_s",
        )?;
        self.scheduler
            .scheduler(1.0)
            .validate()
            .map_err(|e| CliError::Config(format!("scheduler: {e}")))?;
        check(
            self.scheduler.interval_s == self.em.time_step_s,
            "scheduler.interval_s must equal em.time_step_s",
        )?;
        check(self.simulate.max_links >= 1, "simulate.max_links must be >= 1")?;
        check(self.simulate.reading_s > 0.0, "simulate.reading_s must be positive")?;
        check(
            self.simulate.piece_lengths_s.iter().all(|&p| p > 0.0),
            "simulate.piece_lengths_s must be positive",
        )?;
        check(self.bench.horizon_intervals >= 1, "bench.horizon_intervals must be >= 1")?;
        check(
            self.bench.rate_min > 0.0 && self.bench.rate_max > self.bench.rate_min,
            "bench rates must satisfy 0 < rate_min < rate_max",
        )
    }

    pub fn to_toml(&self) -> String {
        let mut s = toml::to_string(self).expect("config serializes");
        if self.synthetic.correlation_shape.is_none() {
            s = s.replace("[synthetic]\n", "[synthetic]\n# correlation_shape = <unset>\n");
        }
        s
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| CliError::Config(format!("bad key {key:?}")))?;
    let mut table = doc;
    for p in parts {
        let entry = table.entry(p).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {p} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// A TOML value, or the raw text as a string when it does not parse.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
