//! On-disk formats and report emission: label CSV files, the pool manifest,
//! atomic writes, and table/structured renderings of every report type.

pub mod formats;
pub mod manifest;
pub mod report;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::domain::{DomainError, Violation};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    ManifestParse { path: String, message: String },
    #[error("{path}: {message}")]
    ConfigParse { path: String, message: String },
    #[error("{path}: unsupported manifest version {version}, expected 1")]
    UnsupportedVersion { path: String, version: u32 },
    #[error("empty pool")]
    EmptyPool,
    #[error("voter id {0:?} cannot be used as a file name")]
    BadVoterFileName(String),
    #[error("{0}")]
    InvalidPool(PoolViolations),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Violation list with a multi-line rendering for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolViolations(pub Vec<Violation>);

impl fmt::Display for PoolViolations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pool validation failed with {} problem(s):", self.0.len())?;
        for violation in &self.0 {
            writeln!(f, "  - {violation}")?;
        }
        Ok(())
    }
}

/// Writes bytes to a temporary file in the target directory and renames it
/// over the destination, so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let to_write_error = |source: std::io::Error| IoError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(to_write_error)?;
    }
    let mut temp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(to_write_error)?;
    temp.write_all(bytes).map_err(to_write_error)?;
    temp.flush().map_err(to_write_error)?;
    temp.persist(path)
        .map_err(|e| to_write_error(e.error))?;
    Ok(())
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}
