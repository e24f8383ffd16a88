//! Resolved key/value parameters: defaults < config general section <
//! config command section < command-line flags.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use crate::error::{CliError, CliResult};

/// Keys that steer the run but never change its outputs.
const HARNESS_KEYS: [&str; 3] = ["out", "threads", "seed"];

#[derive(Debug, Default)]
pub struct Params {
    given: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Params {
    pub fn load(
        config: Option<&Path>,
        command: &str,
        overrides: Vec<(String, String)>,
    ) -> CliResult<Self> {
        let mut given = BTreeMap::new();
        if let Some(path) = config {
            let ini = Ini::load_from_file(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            for (k, v) in ini.general_section().iter() {
                given.insert(normalize_key(k), v.trim().to_owned());
            }
            if let Some(section) = ini.section(Some(command)) {
                for (k, v) in section.iter() {
                    given.insert(normalize_key(k), v.trim().to_owned());
                }
            }
        }
        for (k, v) in overrides {
            given.insert(normalize_key(&k), v);
        }
        Ok(Self {
            given,
            resolved: RefCell::default(),
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.given.get(key).map(String::as_str)
    }

    fn record(&self, key: &str, value: String) {
        if !HARNESS_KEYS.contains(&key) {
            self.resolved.borrow_mut().insert(key.to_owned(), value);
        }
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.given.get(key) {
            None => Ok(None),
            Some(v) => {
                let parsed = v
                    .parse::<T>()
                    .map_err(|e| CliError::config(format!("bad value for {key}: {v:?} ({e})")))?;
                self.record(key, v.clone());
                Ok(Some(parsed))
            }
        }
    }

    pub fn get<T: FromStr + ToString>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn string(&self, key: &str, default: &str) -> CliResult<String> {
        self.get(key, default.to_owned())
    }

    pub fn require(&self, key: &str) -> CliResult<String> {
        self.opt::<String>(key)?
            .ok_or_else(|| CliError::config(format!("missing required key {key}")))
    }

    pub fn flag(&self, key: &str, default: bool) -> CliResult<bool> {
        let raw = self.given.get(key).map(|v| v.to_ascii_lowercase());
        let value = match raw.as_deref() {
            None => default,
            Some("true" | "1" | "yes" | "on") => true,
            Some("false" | "0" | "no" | "off") => false,
            Some(other) => {
                return Err(CliError::config(format!(
                    "bad boolean for {key}: {other:?}"
                )))
            }
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Comma-separated list.
    pub fn list(&self, key: &str, default: &str) -> CliResult<Vec<String>> {
        let v = self.string(key, default)?;
        Ok(v.split(',')
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect())
    }

    /// Comma-separated floats, or `start:stop:count` for an evenly spaced grid.
    pub fn floats(&self, key: &str, default: &str) -> CliResult<Vec<f64>> {
        let v = self.string(key, default)?;
        parse_floats(&v).map_err(|e| CliError::config(format!("bad value for {key}: {e}")))
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    /// Keys supplied by the user that no part of the command read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.resolved.borrow();
        self.given
            .keys()
            .filter(|k| !used.contains_key(*k) && !HARNESS_KEYS.contains(&k.as_str()))
            .cloned()
            .collect()
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

pub fn parse_floats(v: &str) -> Result<Vec<f64>, String> {
    let v = v.trim();
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
        let b: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
        let k: usize = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
        if k < 2 {
            return Err("a grid needs at least 2 points".into());
        }
        return Ok((0..k)
            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
            .collect());
    }
    let out = v
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}
