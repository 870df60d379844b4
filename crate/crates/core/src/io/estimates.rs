use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_header, header_line, io_err, IoError};
use crate::em::ModelState;
use crate::gamma::GammaParams;
use crate::network::{DataError, RoadNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub time: f64,
    pub link_id: String,
    pub k: f64,
    pub theta: f64,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub n_effective: f64,
}

/// Writes one JSON line per link per state. Output goes to `<path>.partial`
/// and is renamed to `path` by [`EstimateWriter::finish`], so an interrupted
/// run leaves the partial file behind.
pub struct EstimateWriter {
    out: BufWriter<File>,
    path: PathBuf,
    partial: PathBuf,
    last_time: f64,
}

impl EstimateWriter {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        let mut partial = path.as_os_str().to_owned();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        let mut out = BufWriter::new(File::create(&partial).map_err(io_err(&partial))?);
        writeln!(out, "{}", header_line("estimates")).map_err(io_err(&partial))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
            partial,
            last_time: f64::NEG_INFINITY,
        })
    }

    pub fn write_state(&mut self, state: &ModelState, net: &RoadNetwork) -> Result<(), IoError> {
        if state.time_index < self.last_time {
            return Err(IoError::Invalid {
                path: self.partial.clone(),
                message: format!("state at {} written after {}", state.time_index, self.last_time),
            });
        }
        self.last_time = state.time_index;
        for (&link, est) in &state.params {
            let p = est.params;
            let rec = EstimateRecord {
                time: state.time_index,
                link_id: net.link(link).id.clone(),
                k: p.k,
                theta: p.theta,
                mean_s: p.mean(),
                stddev_s: p.stddev(),
                n_effective: est.n_effective,
            };
            let line = serde_json::to_string(&rec).expect("estimate serializes");
            writeln!(self.out, "{line}").map_err(io_err(&self.partial))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, IoError> {
        self.out.flush().map_err(io_err(&self.partial))?;
        std::fs::rename(&self.partial, &self.path).map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRecord>, IoError> {
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
        let rec = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Model state made of each link's most recent estimate.
pub fn state_from_estimates(records: &[EstimateRecord], net: &RoadNetwork, path: &Path) -> Result<ModelState, IoError> {
    let mut state = ModelState::new(records.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max));
    for r in records {
        let link = net.index_of(&r.link_id).ok_or_else(|| IoError::Data {
            path: path.to_path_buf(),
            source: DataError::UnknownLink(r.link_id.clone()),
        })?;
        let params = GammaParams::new(r.k, r.theta).map_err(|e| IoError::Invalid {
            path: path.to_path_buf(),
            message: format!("link {}: {e}", r.link_id),
        })?;
        // Records are written in time order, so later ones win.
        state.insert(link, params, r.n_effective);
    }
    Ok(state)
}
