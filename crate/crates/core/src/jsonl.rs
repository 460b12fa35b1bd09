//! Line-delimited JSON helpers with line-numbered errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Schema {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Reads every non-blank line of `path` as a `T`.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| JsonlError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn to_jsonl_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        // Serializing plain data structs with string keys cannot fail.
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    let io_err = |source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(to_jsonl_string(items).as_bytes()).map_err(io_err)?;
    writer.flush().map_err(io_err)
}
