//! Flat `key=value` configuration files.
//!
//! One pair per line; blank lines and lines starting with `#` are skipped.
//! Keys are case-sensitive, values are trimmed, and later duplicates win.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyValueError {
    #[error("line {line}: expected `key=value`, found `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, KeyValueError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| KeyValueError::Malformed {
            line: idx + 1,
            text: line.to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KeyValueError::Malformed {
                line: idx + 1,
                text: line.to_string(),
            });
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Rejects any key outside `allowed`.
pub fn check_keys(pairs: &BTreeMap<String, String>, allowed: &[&str]) -> Result<(), KeyValueError> {
    match pairs.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(KeyValueError::UnknownKey(k.clone())),
        None => Ok(()),
    }
}

/// Splits a comma-separated list, dropping empty entries.
pub fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
