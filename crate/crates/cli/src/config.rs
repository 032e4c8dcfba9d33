//! `key=value` run configuration files.
//!
//! Keys are the long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored. A flag given on the command line
//! always wins over the file.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

pub const KNOWN_KEYS: &[&str] = &[
    "out", "count", "n-fp", "size", "noise", "seed", "data", "model", "stages", "ferns", "pixels",
    "features", "aug", "kappa", "beta", "image", "n-init", "box", "report", "normalizer",
    "landmarks", "radius",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunConfig {
    values: HashMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key {key:?}", i + 1));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key {key:?}", i + 1));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|e| format!("config key {key}: {e}")))
            .transpose()
    }

    /// Flag value, else config value, else `default`.
    pub fn resolve<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, String>
    where
        T::Err: Display,
    {
        Ok(self.optional(key, flag)?.unwrap_or(default))
    }

    /// Flag value, else config value, if either is present.
    pub fn optional<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, String>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file_value(key),
        }
    }

    /// Flag value, else config value; an error when neither is given.
    pub fn required<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, String>
    where
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| format!("missing required --{key}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_overrides_file() {
        let cfg = RunConfig::parse("# comment\nstages = 3\n\nferns=7\n").unwrap();
        assert_eq!(cfg.resolve("stages", Some(9usize), 10).unwrap(), 9);
        assert_eq!(cfg.resolve("stages", None::<usize>, 10).unwrap(), 3);
        assert_eq!(cfg.resolve("pixels", None::<usize>, 400).unwrap(), 400);
        assert_eq!(cfg.required::<usize>("ferns", None).unwrap(), 7);
        assert!(cfg.required::<String>("model", None).is_err());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("stages 3").is_err());
        assert!(RunConfig::parse("colour=red").is_err());
        assert!(RunConfig::parse("seed=1\nseed=2").is_err());
        let cfg = RunConfig::parse("stages=three").unwrap();
        assert!(cfg.resolve("stages", None::<usize>, 1).is_err());
    }
}
