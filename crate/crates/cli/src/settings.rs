//! Resolution of option values: command-line flag, then config file, then default.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use capgen_core::conf::Conf;
use capgen_core::nn::Precision;

use crate::CliError;

/// Keys a config file may set. Each matches the long flag name.
pub const CONFIG_KEYS: &[&str] = &[
    "server",
    "dataset",
    "out",
    "arch",
    "layer",
    "min-freq",
    "seed",
    "precision",
    "beam",
    "max-len",
    "split",
    "max-epochs",
    "batch-size",
    "lr",
    "thresholds",
    "layers",
    "archs",
];

#[derive(Clone, Debug, Default)]
pub struct Settings {
    conf: Conf,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let conf = match path {
            Some(p) => Conf::load(p)?,
            None => Conf::new(),
        };
        conf.check_keys(CONFIG_KEYS)?;
        Ok(Self { conf })
    }

    /// The flag value if given, else the config value if present.
    pub fn optional<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Ok(self.conf.parsed(key)?),
        }
    }

    pub fn value<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.optional(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.optional(flag, key)?
            .ok_or_else(|| CliError::Missing(key.to_string()))
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        self.required(flag, key)
    }

    /// A repeatable flag, or a comma-separated config value.
    pub fn list<T>(&self, flag: Vec<T>, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.conf.get(key) {
            Some(text) => parse_list(text).map_err(|e| CliError::Invalid(format!("{key} = {text:?}: {e}"))),
            None => Ok(default.to_vec()),
        }
    }

    pub fn precision(&self, flag: Option<u32>) -> Result<Precision, CliError> {
        let bits = self.value(flag, "precision", 32u32)?;
        Precision::from_bits(bits).ok_or_else(|| CliError::Invalid(format!("precision must be 32 or 64, got {bits}")))
    }
}

pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}
