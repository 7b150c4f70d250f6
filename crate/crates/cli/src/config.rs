//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! schema_version = 1
//! model = ising
//! n = 8
//! eps_grid = 0:2:0.01
//! ```
//!
//! Unknown and repeated keys are rejected. Command-line flags override file
//! values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{usage, CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1";

pub const KNOWN_KEYS: &[&str] = &[
    "schema_version",
    "model",
    "n",
    "eps_grid",
    "boundary",
    "alpha",
    "coupling_file",
    "cross_check",
    "seed",
    "format",
    "out",
    "records",
    "visibility",
    "m",
    "trials",
    "theta0",
    "dtheta",
    "dtheta_scaled",
    "state",
    "bloch_file",
    "hamiltonian",
    "epsilon",
    "direction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (csv|json)")),
        }
    }
}

/// Effective configuration of one command: file values merged with flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
    /// Directory relative paths in the config file resolve against.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            values: BTreeMap::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_file(command: &str, path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(command, &text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(command: &str, text: &str, origin: &Path) -> CliResult<Self> {
        let mut cfg = Self::new(command);
        let err = |line: usize, msg: String| CliError::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(idx + 1, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(idx + 1, format!("unknown key `{key}`")));
            }
            if cfg.values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(err(idx + 1, format!("key `{key}` repeated")));
            }
        }
        match cfg.values.get("schema_version").map(String::as_str) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(err(0, format!("schema_version `{other}` unsupported, expected {SCHEMA_VERSION}")))
            }
            None => return Err(err(0, format!("missing schema_version (expected {SCHEMA_VERSION})"))),
        }
        Ok(cfg)
    }

    /// Flag override; `key` must be known.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KNOWN_KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}` = `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Usage(format!("`{}` requires `{key}`", self.command)))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}` item `{item}`: {e}")))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|p| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }

    pub fn format(&self) -> CliResult<Format> {
        self.get_or("format", Format::Csv)
    }

    /// SHA-256 over the sorted effective `key=value` lines and the command.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command={}\n", self.command));
        for (k, v) in &self.values {
            if k == "out" || k == "format" {
                continue;
            }
            h.update(format!("{k}={v}\n"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Inclusive grid `a:b:step`.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return usage(format!("grid `{spec}` is not a:b:step"));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Usage(format!("grid `{spec}`: `{s}` is not a number")))
    };
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if b < a {
        return usage(format!("grid `{spec}`: end below start"));
    }
    if a == b {
        return Ok(vec![a]);
    }
    if step.is_nan() || step <= 0.0 {
        return usage(format!("grid `{spec}`: step must be > 0"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return usage(format!("grid `{spec}` has {count} points, limit is 1000000"));
    }
    Ok((0..count).map(|k| a + step * k as f64).collect())
}
