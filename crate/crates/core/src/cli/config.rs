//! `key = value` config files; command-line flags take precedence.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::domain(format!(
                    "config line {}: expected `key = value`, got {raw:?}",
                    no + 1
                )));
            };
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::domain(format!("config line {}: empty key", no + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::domain(format!("config key {key:?} given twice")));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    /// The flag value if given, otherwise the file value, otherwise `None`.
    pub fn opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_file = match self.raw(key) {
            Some(v) => Some(
                v.parse::<T>()
                    .map_err(|_| Error::domain(format!("config key {key}: cannot parse {v:?}")))?,
            ),
            None => None,
        };
        Ok(flag.or(from_file))
    }

    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?
            .ok_or_else(|| Error::domain(format!("missing required value --{key}")))
    }

    /// Boolean switches: set if the flag is present or the file says `true`.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.get(key, None, false)?)
    }

    /// Rejects file keys that the command never asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "unknown config keys for this command: {}",
                unknown.join(", ")
            )))
        }
    }
}
