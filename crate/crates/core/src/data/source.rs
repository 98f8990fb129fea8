use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::{build_vocab, load_dataset, synth_corpus, DatasetSplit, SynthConfig, Vocabulary};

/// Caption file name inside a dataset directory.
pub const CAPTIONS_FILE: &str = "captions.json";
/// Feature file name inside a dataset directory (index at `features.bin.index`).
pub const FEATURES_FILE: &str = "features.bin";
/// `threshold<TAB>vocab_size` summary written by preparation.
pub const VOCAB_SIZES_FILE: &str = "vocab_sizes.tsv";

/// Where a corpus comes from: a dataset directory, or `synth:N[:SEED[:WORDS]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSource {
    Dir(PathBuf),
    Synth { n_images: usize, seed: u64, words: usize },
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("synth:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let num = |i: usize, default: u64| -> Result<u64> {
                parts.get(i).map_or(Ok(default), |p| {
                    p.parse()
                        .map_err(|_| Error::usage(format!("bad synthetic dataset spec {s:?}")))
                })
            };
            let n_images = num(0, 8)? as usize;
            if n_images < 2 {
                return Err(Error::usage("a synthetic corpus needs at least two images"));
            }
            return Ok(DatasetSource::Synth {
                n_images,
                seed: num(1, 0)?,
                words: num(2, 16)? as usize,
            });
        }
        Ok(DatasetSource::Dir(PathBuf::from(s)))
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Dir(p) => write!(f, "{}", p.display()),
            DatasetSource::Synth { n_images, seed, words } => write!(f, "synth:{n_images}:{seed}:{words}"),
        }
    }
}

/// The caption file of a directory: `captions.json`, or the single
/// `dataset*.json` a raw download ships with.
pub fn find_caption_file(dir: &Path) -> Result<PathBuf> {
    let direct = dir.join(CAPTIONS_FILE);
    if direct.is_file() {
        return Ok(direct);
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("dataset"))
        })
        .collect();
    found.sort();
    match found.len() {
        1 => Ok(found.remove(0)),
        0 => Err(Error::format(
            dir,
            None,
            format!("no {CAPTIONS_FILE} or dataset*.json caption file"),
        )),
        _ => Err(Error::format(dir, None, "several dataset*.json files; keep only one")),
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<DatasetSplit> {
        match self {
            DatasetSource::Dir(dir) => load_dataset(find_caption_file(dir)?, dir.join(FEATURES_FILE)),
            DatasetSource::Synth { n_images, seed, words } => {
                Ok(synth_corpus(SynthConfig::new(*n_images, *words, *seed)))
            }
        }
    }

    pub fn vocab_path(dir: &Path, threshold: usize) -> PathBuf {
        dir.join(format!("vocab_{threshold}.txt"))
    }

    /// The stored vocabulary for `threshold` if preparation wrote one,
    /// otherwise one built from the training captions.
    pub fn vocabulary(&self, dataset: &DatasetSplit, threshold: usize) -> Result<Vocabulary> {
        if let DatasetSource::Dir(dir) = self {
            let path = Self::vocab_path(dir, threshold);
            if path.is_file() {
                return Vocabulary::load(path, threshold);
            }
        }
        build_vocab(dataset.train_captions(), threshold)
    }
}
