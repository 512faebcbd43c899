//! Run configuration: `key=value` files, `VRTKIT_*` variables and flags.
//!
//! A key is looked up on the command line first, then in the environment
//! (`VRTKIT_` + upper-cased key with `.` and `-` turned into `_`), then in
//! the config file, then falls back to its default.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every recognised key with its default (`None` = unset).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("workers", None),
    ("seed", Some("1")),
    ("direction", None),
    ("mode", None),
    ("variant", Some("base")),
    ("replay", None),
    ("threshold", Some("0.01")),
    ("align_rule", Some("both")),
    ("cap", Some("150")),
    ("window", None),
    ("cutoff.DE-EN", Some("0.3")),
    ("cutoff.EN-DE", Some("0.5")),
    ("test_docs", Some("170")),
    ("min_segments", Some("12")),
    ("groups", Some("speaker")),
    ("n_splines", Some("5")),
    ("gam_swap", Some("false")),
    ("gam_points", Some("100")),
];

pub fn env_name(key: &str) -> String {
    let mut s = String::from("VRTKIT_");
    for c in key.chars() {
        s.push(if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' });
    }
    s
}

/// Parses a `key=value` file. `#` starts a comment line.
pub fn parse_config_file(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("{origin}:{}: expected key=value, got '{line}'", n + 1)));
        };
        let k = k.trim();
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(CliError::Config(format!("{origin}:{}: unknown key '{k}'", n + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Resolved key/value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn resolve(
        flags: &BTreeMap<String, String>,
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<RunConfig, CliError> {
        let from_file = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                parse_config_file(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        for k in flags.keys() {
            if !KEYS.iter().any(|(name, _)| name == k) {
                return Err(CliError::Config(format!("unknown key '{k}'")));
            }
        }
        let mut values = BTreeMap::new();
        for (key, default) in KEYS {
            let v = flags
                .get(*key)
                .cloned()
                .or_else(|| env(&env_name(key)))
                .or_else(|| from_file.get(*key).cloned())
                .or_else(|| default.map(str::to_string));
            if let Some(v) = v {
                values.insert(key.to_string(), v);
            }
        }
        let cfg = RunConfig { values };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for key in ["threshold", "cutoff.DE-EN", "cutoff.EN-DE"] {
            let v: f64 = self.parse(key)?.expect("defaulted");
            if !(v > 0.0) {
                return Err(CliError::Config(format!("{key} must be positive, got {v}")));
            }
        }
        for key in ["cap", "test_docs", "min_segments", "n_splines"] {
            let v: usize = self.parse(key)?.expect("defaulted");
            if v == 0 {
                return Err(CliError::Config(format!("{key} must be positive")));
            }
        }
        if let Some(w) = self.parse::<usize>("window")? {
            if w == 0 {
                return Err(CliError::Config("window must be positive".into()));
            }
        }
        if let Some(w) = self.parse::<usize>("workers")? {
            if w == 0 {
                return Err(CliError::Config("workers must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key}: cannot parse '{v}': {e}")))
            })
            .transpose()
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| CliError::Config(format!("{key} is required (flag, {} or config file)", env_name(key))))
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
            .unwrap_or_default()
    }

    /// Canonical `key=value` lines, sorted by key.
    /// `key=value` lines for every key that can change outputs, so
    /// `workers` is left out.
    pub fn lines(&self) -> Vec<String> {
        self.values
            .iter()
            .filter(|(k, _)| k.as_str() != "workers")
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }

    /// sha256 over the canonical lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.values.iter().filter(|(k, _)| k.as_str() != "workers") {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
