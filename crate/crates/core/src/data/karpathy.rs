use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top level of a Karpathy-style caption file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptionFile {
    pub images: Vec<CaptionImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionImage {
    pub split: String,
    pub filename: String,
    pub sentences: Vec<CaptionSentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imgid: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionSentence {
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentid: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

pub fn read_caption_file(path: impl AsRef<Path>) -> Result<CaptionFile> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text)
        .map_err(|e| Error::format(path, None, format!("line {} column {}: {e}", e.line(), e.column())))
}
