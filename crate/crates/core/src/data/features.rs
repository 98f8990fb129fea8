//! Binary feature file: `"FEAT0001"`, `u32` count, `u32` dim, then
//! `count × dim` little-endian `f32`. Row order follows a sidecar index file
//! (`<feature file>.index`) holding one image filename per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"FEAT0001";
const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub names: Vec<String>,
    pub dim: usize,
    /// Row-major `names.len() × dim`.
    pub values: Vec<f32>,
}

impl FeatureFile {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn feature_index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index");
    PathBuf::from(s)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            Some(bytes.len() as u64),
            "file shorter than the 16-byte header",
        ));
    }
    if &bytes[..8] != FEATURE_MAGIC {
        return Err(Error::format(path, Some(0), "bad magic, expected FEAT0001"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + count * dim * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            Some(bytes.len().min(expected) as u64),
            format!(
                "header says {count}×{dim} values ({expected} bytes) but file has {} bytes",
                bytes.len()
            ),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let index = feature_index_path(path);
    let text = fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let names: Vec<String> = text.lines().map(str::to_owned).collect();
    if names.len() != count {
        return Err(Error::format(
            &index,
            None,
            format!("index lists {} images but feature file has {count} rows", names.len()),
        ));
    }
    Ok(FeatureFile { names, dim, values })
}

pub fn write_features(path: impl AsRef<Path>, file: &FeatureFile) -> Result<()> {
    let path = path.as_ref();
    if file.values.len() != file.names.len() * file.dim {
        return Err(Error::Dimension {
            context: "write_features",
            left: vec![file.names.len(), file.dim],
            right: vec![file.values.len()],
        });
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + file.values.len() * 4);
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.extend_from_slice(&(file.names.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(file.dim as u32).to_le_bytes());
    for v in &file.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let mut index = String::new();
    for n in &file.names {
        index.push_str(n);
        index.push('\n');
    }
    let index_path = feature_index_path(path);
    fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))
}
