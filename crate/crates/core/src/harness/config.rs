use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Environment variable that overrides the `seed` key.
pub const SEED_ENV: &str = "WPROX_SEED";

/// Flat `key = value` configuration. Blank lines and `#` comments are
/// ignored; later keys win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse { line: i + 1, message: "empty key".into() });
            }
            entries.insert(key.replace('_', "-"), v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Keys are normalized so `batch_size` and `batch-size` coincide.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&key.replace('_', "-")).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.replace('_', "-"), value.into());
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::InvalidParameter(format!("config key {key}: {e}"))),
        }
    }

    /// Comma-separated list value.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| Error::InvalidParameter(format!("config key {key}: {e}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// The seed, with the environment variable taking precedence.
    pub fn seed(&self, env: Option<&str>) -> Result<Option<u64>> {
        match env {
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| Error::InvalidParameter(format!("{SEED_ENV}: {e}"))),
            None => self.parsed("seed"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let c = Config::parse("# comment\nalpha = 2\n\nbatch_size=64 # trailing\nsizes=50, 100,200\n").unwrap();
        assert_eq!(c.get("alpha"), Some("2"));
        assert_eq!(c.parsed::<usize>("batch-size").unwrap(), Some(64));
        assert_eq!(c.list::<usize>("sizes").unwrap(), Some(vec![50, 100, 200]));
        assert_eq!(c.parsed::<f64>("missing").unwrap(), None);
        assert!(c.parsed::<usize>("alpha").is_ok());
        assert!(Config::parse("x=1\nnonsense\n").is_err());
        match Config::parse("a=1\n\nbad").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn seed_override() {
        let c = Config::parse("seed=5").unwrap();
        assert_eq!(c.seed(None).unwrap(), Some(5));
        assert_eq!(c.seed(Some("9")).unwrap(), Some(9));
        assert!(c.seed(Some("x")).is_err());
    }
}
