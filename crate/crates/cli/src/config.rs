//! Flat key=value configuration with file, override, and flag layers.
//!
//! A run is configured by an optional text file of `key=value` lines,
//! followed by `key=value` arguments on the command line, followed by the
//! dedicated flags (`--seed` beats a `seed=` entry). Each subcommand
//! declares the keys it understands; anything else is rejected before any
//! computation starts.

use georelay::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

/// Resolved key=value settings for one run.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Keys with their final values, including defaults, for the CSV echo.
    resolved: BTreeMap<String, String>,
}

impl Settings {
    /// Loads the file layer (if any) and the override layer, validating
    /// every key against `allowed`.
    pub fn load(
        file: Option<&Path>,
        overrides: &[String],
        allowed: &[&str],
    ) -> Result<Settings> {
        let mut values = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (number, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{} line {}: expected key=value, got {line}",
                        path.display(),
                        number + 1
                    ))
                })?;
                Self::check_key(key.trim(), allowed)?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        for entry in overrides {
            let (key, value) = entry.split_once('=').ok_or_else(|| {
                Error::Config(format!("override {entry} is not key=value"))
            })?;
            Self::check_key(key.trim(), allowed)?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Settings {
            values,
            resolved: BTreeMap::new(),
        })
    }

    fn check_key(key: &str, allowed: &[&str]) -> Result<()> {
        if allowed.contains(&key) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown key {key}; this command accepts: {}",
                allowed.join(", ")
            )))
        }
    }

    /// Highest-precedence layer: a dedicated flag value.
    pub fn set_flag<T: Display>(&mut self, key: &str, value: T) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn note<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T>
    where
        T::Err: Display,
    {
        raw.parse::<T>()
            .map_err(|e| Error::Config(format!("{key}={raw}: {e}")))
    }

    /// Value with a default when the key is absent.
    pub fn get_or<T: std::str::FromStr + Display>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let value = match self.values.get(key).cloned() {
            Some(raw) => self.parsed(key, &raw)?,
            None => default,
        };
        self.note(key, &value);
        Ok(value)
    }

    /// Optional value; absent keys stay out of the echo.
    pub fn get_opt<T: std::str::FromStr + Display>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key).cloned() {
            Some(raw) => {
                let value: T = self.parsed(key, &raw)?;
                self.note(key, &value);
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    /// Required string kept verbatim.
    pub fn require_str(&mut self, key: &str) -> Result<String> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key}")))?
            .clone();
        self.note(key, &raw);
        Ok(raw)
    }

    /// Optional string kept verbatim.
    pub fn get_str_opt(&mut self, key: &str) -> Option<String> {
        let raw = self.values.get(key).cloned();
        if let Some(ref v) = raw {
            self.note(key, v);
        }
        raw
    }

    /// Grid of f64 values: either a comma list (`1,2,5`) or an inclusive
    /// linspace `start:stop:count`.
    pub fn grid(&mut self, key: &str, default: &str) -> Result<Vec<f64>> {
        let raw = self
            .values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        let grid = parse_grid(&raw).map_err(|e| Error::Config(format!("{key}={raw}: {e}")))?;
        self.resolved.insert(key.to_string(), raw);
        Ok(grid)
    }

    /// Comma-separated list of lowercase words.
    pub fn word_list(&mut self, key: &str, default: &str) -> Result<Vec<String>> {
        let raw = self
            .values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        let words: Vec<String> = raw
            .split(',')
            .map(|w| w.trim().to_ascii_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        self.resolved.insert(key.to_string(), raw);
        Ok(words)
    }

    /// `# key=value` lines of everything the run actually used, sorted by
    /// key, for the output header. Re-running with exactly these settings
    /// reproduces the output bytes.
    pub fn echo_lines(&self) -> Vec<String> {
        self.resolved
            .iter()
            .map(|(k, v)| format!("# {k}={v}"))
            .collect()
    }
}

fn parse_grid(raw: &str) -> std::result::Result<Vec<f64>, String> {
    if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').collect();
        if parts.len() != 3 {
            return Err("linspace needs start:stop:count".into());
        }
        let start: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
        let count: usize = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
        if count == 0 {
            return Ok(Vec::new());
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        return Ok((0..count)
            .map(|i| {
                if i == count - 1 {
                    stop
                } else {
                    start + i as f64 * step
                }
            })
            .collect());
    }
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}")))
        .collect()
}
