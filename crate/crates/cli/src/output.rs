//! Artifact writers. Floats use Rust's shortest round-trip formatting, so
//! identical inputs give byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Stage};

pub fn write_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(stage, path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(stage, path, e))
}

/// Writes `header` then `rows`; every row must match the header width.
pub fn write_csv<I, R>(stage: Stage, path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let err = |e: csv::Error| CliError::io(stage, path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(stage, path, e))
}

/// Empty string for a missing value.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
