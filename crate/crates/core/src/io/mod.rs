//! File formats, replay of recorded feeds and the historical store.

mod estimates;
mod network;
mod replay;
mod store;
mod trajectories;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::network::DataError;

pub use estimates::{read_estimates, state_from_estimates, EstimateRecord, EstimateWriter};
pub use network::{load_network, write_network};
pub use replay::{ReplayBatches, ReplaySource, DEFAULT_RECORD_CAP};
pub use store::{BucketKey, HistoricalStore};
pub use trajectories::{read_trajectories, write_trajectories, TrajectoryReader};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: unsupported format_version {found}", path.display())]
    Version { path: PathBuf, found: String },
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("{}: record {index} starts at {time}, before its predecessor", path.display())]
    Unsorted { path: PathBuf, index: usize, time: f64 },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// JSON header line written at the top of every JSON-lines file.
pub(crate) fn header_line(kind: &str) -> String {
    serde_json::json!({ "format_version": FORMAT_VERSION, "kind": kind }).to_string()
}

/// `Some(Ok(()))` if `line` is a supported header, `Some(Err)` for a header
/// with another version, `None` if it is not a header.
pub(crate) fn check_header(line: &str, path: &Path) -> Option<Result<(), IoError>> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    let version = value.as_object()?.get("format_version")?;
    if version.as_u64() == Some(u64::from(FORMAT_VERSION)) {
        Some(Ok(()))
    } else {
        Some(Err(IoError::Version {
            path: path.to_path_buf(),
            found: version.to_string(),
        }))
    }
}
