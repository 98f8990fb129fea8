use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Precision;

/// Dimensionality of the distributed CNN image vectors.
pub const DEFAULT_IMAGE_SIZE: usize = 4096;

/// Layer sizes of the original experiment grid.
pub const GRID_LAYER_SIZES: [usize; 3] = [128, 256, 512];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Inject,
    Merge,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Merge, Architecture::Inject];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Inject => "inject",
            Architecture::Merge => "merge",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inject" => Ok(Architecture::Inject),
            "merge" => Ok(Architecture::Merge),
            other => Err(Error::config(format!(
                "unknown architecture {other:?} (expected inject or merge)"
            ))),
        }
    }
}

/// Architecture and sizes. `layer_size` is shared by the embedding, the LSTM
/// state and the projected image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub layer_size: usize,
    pub vocab_size: usize,
    pub image_size: usize,
    pub min_freq: usize,
    pub precision: Precision,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, layer_size: usize, vocab_size: usize) -> Self {
        ModelConfig {
            architecture,
            layer_size,
            vocab_size,
            image_size: DEFAULT_IMAGE_SIZE,
            min_freq: 3,
            precision: Precision::F32,
            seed: 0,
        }
    }

    pub fn with_image_size(mut self, image_size: usize) -> Self {
        self.image_size = image_size;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_min_freq(mut self, min_freq: usize) -> Self {
        self.min_freq = min_freq;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_size == 0 {
            return Err(Error::config("layer size must be positive"));
        }
        if self.vocab_size < 4 {
            return Err(Error::config(format!(
                "vocabulary size {} cannot hold the three special tokens plus a word",
                self.vocab_size
            )));
        }
        if self.image_size == 0 {
            return Err(Error::config("image vector size must be positive"));
        }
        if self.min_freq == 0 {
            return Err(Error::config("minimum token frequency must be at least 1"));
        }
        Ok(())
    }

    /// Width of the LSTM input.
    pub fn lstm_input_size(&self) -> usize {
        match self.architecture {
            Architecture::Inject => 2 * self.layer_size,
            Architecture::Merge => self.layer_size,
        }
    }

    /// Width of the output layer's input.
    pub fn output_input_size(&self) -> usize {
        match self.architecture {
            Architecture::Inject => self.layer_size,
            Architecture::Merge => 2 * self.layer_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::new(Architecture::Merge, 128, 2539).validate().is_ok());
        assert!(ModelConfig::new(Architecture::Merge, 0, 2539).validate().is_err());
        assert!(ModelConfig::new(Architecture::Merge, 8, 3).validate().is_err());
        assert!(ModelConfig::new(Architecture::Inject, 8, 10)
            .with_image_size(0)
            .validate()
            .is_err());
    }

    #[test]
    fn architecture_parsing() {
        assert_eq!("Merge".parse::<Architecture>().unwrap(), Architecture::Merge);
        assert_eq!("inject".parse::<Architecture>().unwrap(), Architecture::Inject);
        assert!("pre-inject".parse::<Architecture>().is_err());
    }
}
