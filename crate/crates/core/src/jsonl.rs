//! Line-delimited JSON records, the on-disk format for every artifact.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl RecordError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        RecordError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Serialize records one per line.
pub fn write_records<'a, T, W>(mut out: W, records: impl IntoIterator<Item = &'a T>) -> io::Result<()>
where
    T: Serialize + 'a,
    W: Write,
{
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_file<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), RecordError> {
    let file = File::create(path).map_err(|e| RecordError::io(path, e))?;
    write_records(BufWriter::new(file), records).map_err(|e| RecordError::io(path, e))
}

/// Raw non-blank lines with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, RecordError> {
    let file = File::open(path).map_err(|e| RecordError::io(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RecordError::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RecordError> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|source| RecordError::Parse {
                path: path.to_path_buf(),
                line,
                source,
            })
        })
        .collect()
}
