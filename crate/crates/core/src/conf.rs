//! Flat UTF-8 `key = value` configuration files. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Conf {
    entries: BTreeMap<String, String>,
}

impl Conf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let content = line.trim();
            if !content.is_empty() && !content.starts_with('#') {
                let Some((k, v)) = content.split_once('=') else {
                    return Err(Error::format(
                        path,
                        Some(offset),
                        format!("expected key = value, got {content:?}"),
                    ));
                };
                let key = k.trim();
                if key.is_empty() {
                    return Err(Error::format(path, Some(offset), "empty key"));
                }
                if entries.insert(key.to_owned(), v.trim().to_owned()).is_some() {
                    return Err(Error::format(path, Some(offset), format!("duplicate key {key:?}")));
                }
            }
            offset += line.len() as u64;
        }
        Ok(Conf { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses `key` if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::config(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    /// Parses `key`, failing if absent.
    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| Error::config(format!("missing key {key:?}")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::config(format!(
                "unknown key {k:?}; expected one of {}",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Conf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
