//! Flat key-value configuration files.
//!
//! ```text
//! # comment
//! seed = 7
//! [env]
//! sphere_radius = 0.2     # stored as `env.sphere_radius`
//! train.iterations = 500  # explicit prefixes work too
//! ```
//!
//! Keys are case-sensitive. Every lookup is recorded so callers can reject
//! keys nothing consumed.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::ConfigError;

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    touched: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line: idx + 1, detail: "unterminated section header".into() })?
                    .trim();
                if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
                    return Err(ConfigError::Syntax { line: idx + 1, detail: format!("bad section name `{name}`") });
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: idx + 1, detail: "expected `key = value`".into() })?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax { line: idx + 1, detail: format!("bad key `{k}`") });
            }
            let key = if section.is_empty() || k.contains('.') { k.to_string() } else { format!("{section}.{k}") };
            cfg.values.insert(key, v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, detail: format!("override `{kv}` is not key=value") })?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.touched.borrow_mut().insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::Value { key: key.to_string(), detail: format!("`{v}`: {e}") }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| ConfigError::Value { key: key.to_string(), detail: "missing required key".into() })
    }

    /// Comma-separated list value.
    pub fn get_list(&self, key: &str) -> Option<Vec<String>> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    /// Marks every key under `prefix.` as consumed.
    pub fn touch_prefix(&self, prefix: &str) {
        let p = format!("{prefix}.");
        let mut t = self.touched.borrow_mut();
        for k in self.values.keys().filter(|k| k.starts_with(&p)) {
            t.insert(k.clone());
        }
    }

    /// Keys present in the file that no lookup asked for.
    pub fn unused_keys(&self) -> Vec<String> {
        let t = self.touched.borrow();
        self.values.keys().filter(|k| !t.contains(*k)).cloned().collect()
    }

    pub fn reject_unused(&self) -> Result<(), ConfigError> {
        match self.unused_keys().into_iter().next() {
            Some(k) => Err(ConfigError::UnknownKey(k)),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical serialization: one `key = value` line per entry, sorted by key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}
