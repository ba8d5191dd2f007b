//! Flat `key = value` configuration files with `#` comments. Values are
//! kept as strings; the CLI layer parses them into typed flags, and any
//! flag given on the command line overrides the file.

use std::collections::BTreeMap;

use rrsr_core::{Error, Result};

/// Parses configuration text. Blank lines and lines starting with `#` are
/// skipped; every other line must be `key = value`. Later occurrences of a
/// key override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Format(format!(
                "config line {}: expected 'key = value', got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Format(format!(
                "config line {}: empty key",
                lineno + 1
            )));
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Parses a count list written either as a range `start:end:step`
/// (inclusive of `end` when the step lands on it) or as a comma-separated
/// list `a,b,c`, or a single value.
pub fn parse_count_list(text: &str) -> Result<Vec<usize>> {
    let bad = |msg: &str| Error::InvalidParameter(format!("count list {text:?}: {msg}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("ranges take the form start:end:step"));
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step == 0 {
            return Err(bad("step must be positive"));
        }
        if end < start {
            return Err(bad("end must not precede start"));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        let values: Vec<usize> = text
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        if values.is_empty() {
            return Err(bad("no values"));
        }
        Ok(values)
    }
}
