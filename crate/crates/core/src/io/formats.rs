//! The flat file formats besides the manifest: label CSV files
//! (`sample_id,label`, used for both predictions and gold), the dialogue map
//! (`sample_id,dialogue_id`), and the simulator config (TOML). Parsers report
//! the file, line, and offending value on malformed input.

use std::collections::BTreeMap;
use std::path::Path;

use crate::domain::{ClassLabel, GoldLabels};
use crate::io::{atomic_write, read_to_string, IoError};
use crate::simulator::SimConfig;

pub const LABEL_HEADER: &str = "sample_id,label";
pub const DIALOGUE_HEADER: &str = "sample_id,dialogue_id";

fn malformed(path: &str, line: usize, message: impl Into<String>) -> IoError {
    IoError::Malformed {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Splits one CSV row into exactly two fields, tolerating a trailing `\r`.
fn two_fields<'a>(
    row: &'a str,
    path: &str,
    line: usize,
) -> Result<(&'a str, &'a str), IoError> {
    let row = row.strip_suffix('\r').unwrap_or(row);
    if row.is_empty() {
        return Err(malformed(path, line, "empty row"));
    }
    let mut fields = row.split(',');
    let first = fields.next().unwrap_or_default();
    let second = fields
        .next()
        .ok_or_else(|| malformed(path, line, "expected two comma-separated fields"))?;
    if fields.next().is_some() {
        return Err(malformed(path, line, "expected two comma-separated fields"));
    }
    if first.is_empty() {
        return Err(malformed(path, line, "empty sample id"));
    }
    Ok((first, second))
}

fn check_header(text: &str, expected: &str, path: &str) -> Result<(), IoError> {
    let first = text
        .lines()
        .next()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or_default();
    if first != expected {
        return Err(malformed(
            path,
            1,
            format!("expected header {expected:?}, found {first:?}"),
        ));
    }
    Ok(())
}

/// Parses a label CSV. `path` only labels error messages.
pub fn parse_labels(text: &str, path: &str) -> Result<BTreeMap<String, ClassLabel>, IoError> {
    check_header(text, LABEL_HEADER, path)?;
    let mut entries = BTreeMap::new();
    for (index, row) in text.lines().enumerate().skip(1) {
        let line = index + 1;
        let (sample_id, value) = two_fields(row, path, line)?;
        let number: u8 = value.parse().map_err(|_| {
            malformed(path, line, format!("label {value:?} is not an integer 0..8"))
        })?;
        let label = ClassLabel::new(number).map_err(|_| {
            malformed(path, line, format!("label {number} out of range 0..8"))
        })?;
        if entries.insert(sample_id.to_string(), label).is_some() {
            return Err(malformed(
                path,
                line,
                format!("duplicate sample id {sample_id:?}"),
            ));
        }
    }
    Ok(entries)
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, ClassLabel>, IoError> {
    parse_labels(&read_to_string(path)?, &path.display().to_string())
}

/// Reads a label file as gold: same format, must be non-empty.
pub fn read_gold(path: &Path) -> Result<GoldLabels, IoError> {
    Ok(GoldLabels::new(read_labels(path)?)?)
}

/// Renders labels in the canonical on-disk form: header, one row per sample
/// in sample-id order, newline-terminated.
pub fn render_labels(entries: &BTreeMap<String, ClassLabel>) -> String {
    let mut out = String::with_capacity(entries.len() * 12 + LABEL_HEADER.len() + 1);
    out.push_str(LABEL_HEADER);
    out.push('\n');
    for (sample_id, label) in entries {
        out.push_str(sample_id);
        out.push(',');
        out.push_str(&label.value().to_string());
        out.push('\n');
    }
    out
}

pub fn write_labels(
    path: &Path,
    entries: &BTreeMap<String, ClassLabel>,
) -> Result<(), IoError> {
    atomic_write(path, render_labels(entries).as_bytes())
}

/// Parses a dialogue map CSV (`sample_id,dialogue_id`).
pub fn parse_dialogue_map(text: &str, path: &str) -> Result<BTreeMap<String, String>, IoError> {
    check_header(text, DIALOGUE_HEADER, path)?;
    let mut entries = BTreeMap::new();
    for (index, row) in text.lines().enumerate().skip(1) {
        let line = index + 1;
        let (sample_id, dialogue_id) = two_fields(row, path, line)?;
        if dialogue_id.is_empty() {
            return Err(malformed(path, line, "empty dialogue id"));
        }
        if entries
            .insert(sample_id.to_string(), dialogue_id.to_string())
            .is_some()
        {
            return Err(malformed(
                path,
                line,
                format!("duplicate sample id {sample_id:?}"),
            ));
        }
    }
    Ok(entries)
}

pub fn read_dialogue_map(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    parse_dialogue_map(&read_to_string(path)?, &path.display().to_string())
}

pub fn render_dialogue_map(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    out.push_str(DIALOGUE_HEADER);
    out.push('\n');
    for (sample_id, dialogue_id) in entries {
        out.push_str(sample_id);
        out.push(',');
        out.push_str(dialogue_id);
        out.push('\n');
    }
    out
}

pub fn write_dialogue_map(
    path: &Path,
    entries: &BTreeMap<String, String>,
) -> Result<(), IoError> {
    atomic_write(path, render_dialogue_map(entries).as_bytes())
}

/// Parses a simulator config from TOML. Structural validation (stochastic
/// rows, prior, rho range) happens when the config is run.
pub fn parse_sim_config(text: &str, path: &str) -> Result<SimConfig, IoError> {
    toml::from_str(text).map_err(|e| IoError::ConfigParse {
        path: path.to_string(),
        message: e.to_string(),
    })
}

pub fn read_sim_config(path: &Path) -> Result<SimConfig, IoError> {
    parse_sim_config(&read_to_string(path)?, &path.display().to_string())
}
