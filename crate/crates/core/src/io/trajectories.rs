use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use super::{check_header, header_line, io_err, IoError};
use crate::network::TrajectoryMeasurement;

/// Lazily parsed JSON-lines trajectory file. Malformed lines are skipped
/// and counted.
pub struct TrajectoryReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: u64,
    skipped: usize,
    fatal: bool,
}

pub fn read_trajectories(path: &Path) -> Result<TrajectoryReader, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(TrajectoryReader {
        path: path.to_path_buf(),
        lines: BufReader::new(file).lines(),
        line_no: 0,
        skipped: 0,
        fatal: false,
    })
}

impl TrajectoryReader {
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn well_formed(t: &TrajectoryMeasurement) -> bool {
    !t.path.is_empty()
        && t.start_time.is_finite()
        && t.duration_s.is_finite()
        && t.duration_s > 0.0
        && t.offset_start_m.is_finite()
        && t.offset_start_m >= 0.0
        && t.offset_end_m.is_finite()
        && t.offset_end_m >= 0.0
}

impl Iterator for TrajectoryReader {
    /// Read failures end the stream with an error; malformed records do not.
    type Item = Result<TrajectoryMeasurement, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fatal {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.fatal = true;
                    return Some(Err(io_err(&self.path)(e)));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            if self.line_no == 1 {
                match check_header(&line, &self.path) {
                    Some(Ok(())) => continue,
                    Some(Err(e)) => {
                        self.fatal = true;
                        return Some(Err(e));
                    }
                    None => {}
                }
            }
            match serde_json::from_str::<TrajectoryMeasurement>(&line) {
                Ok(t) if well_formed(&t) => return Some(Ok(t)),
                _ => self.skipped += 1,
            }
        }
    }
}

pub fn write_trajectories<'a, I>(path: &Path, records: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = &'a TrajectoryMeasurement>,
{
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(out, "{}", header_line("trajectories")).map_err(io_err(path))?;
    for r in records {
        let line = serde_json::to_string(r).expect("trajectory serializes");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}
