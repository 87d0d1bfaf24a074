//! Plain-text `key = value` files used for run configs and truth records.
//!
//! `#` starts a comment. Keys may repeat (peak lists use this); scalar lookups
//! take the last occurrence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueFile {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    comment: Option<String>,
}

impl KeyValueFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: Default::default(),
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            entries.push(Entry {
                key: key.trim().to_string(),
                value: value.trim().to_string(),
                comment: None,
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        fs::write(path, self.to_text(header)).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        for e in &self.entries {
            match &e.comment {
                Some(c) => {
                    let _ = writeln!(out, "{} = {}  # {}", e.key, e.value, c);
                }
                None => {
                    let _ = writeln!(out, "{} = {}", e.key, e.value);
                }
            }
        }
        out
    }

    /// Appends an entry (keeping earlier ones with the same key).
    pub fn push(&mut self, key: &str, value: impl ToString, comment: Option<&str>) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            comment: comment.map(str::to_string),
        });
    }

    /// Replaces every entry for `key` with a single one.
    pub fn set(&mut self, key: &str, value: impl ToString, comment: Option<&str>) {
        self.entries.retain(|e| e.key != key);
        self.push(key, value, comment);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.key == key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("`{key}` is not a number: `{v}`")))
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("`{key}` has an invalid value: `{v}`")))
            })
            .transpose()
    }
}

/// Parses a whitespace- or comma-separated list of numbers.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    crate::spectrum::split_fields(s)
        .into_iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{f}` is not a number")))
        })
        .collect()
}
