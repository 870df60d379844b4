use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, IoError, FORMAT_VERSION};
use crate::network::{Link, RoadNetwork};

const COLUMNS: [&str; 5] = ["id", "from", "to", "length_m", "speed_limit_mps"];

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    from: String,
    to: String,
    length_m: f64,
    speed_limit_mps: f64,
}

/// Read a CSV network with columns `id,from,to,length_m,speed_limit_mps`.
///
/// An optional first line `# format_version=1` is checked; other `#` lines
/// are ignored.
pub fn load_network(path: &Path) -> Result<RoadNetwork, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    if let Some(rest) = first.trim().strip_prefix('#') {
        if let Some(v) = rest.trim().strip_prefix("format_version=") {
            if v.trim() != FORMAT_VERSION.to_string() {
                return Err(IoError::Version {
                    path: path.to_path_buf(),
                    found: v.trim().to_string(),
                });
            }
        }
    }
    let chained = std::io::Cursor::new(first.into_bytes()).chain(reader);
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(chained);

    let parse_err = |line: u64, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = csv.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    for col in COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(parse_err(1, format!("missing column {col}")));
        }
    }
    let mut links = Vec::new();
    for row in csv.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        links.push(Link {
            id: row.id,
            from_node: row.from,
            to_node: row.to,
            length_m: row.length_m,
            speed_limit_mps: row.speed_limit_mps,
        });
    }
    RoadNetwork::new(links).map_err(|source| IoError::Data {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_network(net: &RoadNetwork, path: &Path) -> Result<(), IoError> {
    let mut file = std::io::BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(file, "# format_version={FORMAT_VERSION}").map_err(io_err(path))?;
    let mut csv = csv::Writer::from_writer(file);
    for l in net.links() {
        csv.serialize(Row {
            id: l.id.clone(),
            from: l.from_node.clone(),
            to: l.to_node.clone(),
            length_m: l.length_m,
            speed_limit_mps: l.speed_limit_mps,
        })
        .map_err(|e| IoError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    csv.flush().map_err(io_err(path))?;
    Ok(())
}
