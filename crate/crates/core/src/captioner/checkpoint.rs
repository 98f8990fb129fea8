//! Checkpoint layout (all integers little-endian `u32`):
//!
//! ```text
//! "CAPRNN01"
//! config_len, config JSON (UTF-8)
//! tensor_count
//! per tensor: name_len, name (UTF-8), rank, extents[rank], values (f32 LE)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{ParamSet, Precision, Real, Tensor};

use super::{AnyModel, CaptionModel, ModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CAPRNN01";

pub fn write_checkpoint<T: Real>(model: &CaptionModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape().len() as u32).to_le_bytes());
        for &e in p.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint<T: Real>(model: &CaptionModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                Some(self.pos as u64),
                format!("truncated while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn utf8(&mut self, n: usize, what: &str) -> Result<&'a str> {
        let at = self.pos as u64;
        let b = self.take(n, what)?;
        std::str::from_utf8(b).map_err(|_| Error::format(self.path, Some(at), format!("{what} is not UTF-8")))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.path, Some(self.pos as u64), msg)
    }
}

/// Parses checkpoint bytes; `path` is used for error messages only.
pub fn read_checkpoint(bytes: &[u8], path: &Path) -> Result<AnyModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::format(
            path,
            Some(0),
            "bad magic, not a caption model checkpoint",
        ));
    }
    let n = r.u32("config length")?;
    let config_text = r.utf8(n, "config record")?;
    let config: ModelConfig =
        serde_json::from_str(config_text).map_err(|e| Error::format(path, Some(12), format!("config record: {e}")))?;
    config.validate()?;
    let mut tensors = Vec::new();
    let count = r.u32("tensor count")?;
    for _ in 0..count {
        let name_len = r.u32("tensor name length")?;
        let name = r.utf8(name_len, "tensor name")?.to_owned();
        let rank = r.u32("tensor rank")?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")?);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4, "tensor values")?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((name, shape, values));
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes after last tensor"));
    }
    match config.precision {
        Precision::F32 => Ok(AnyModel::F32(assemble(&config, tensors, path)?)),
        Precision::F64 => Ok(AnyModel::F64(assemble(&config, tensors, path)?)),
    }
}

fn assemble<T: Real>(
    config: &ModelConfig,
    tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
    path: &Path,
) -> Result<CaptionModel<T>> {
    let mut model = CaptionModel::<T>::zeros(config)?;
    let mut params = model.params_mut();
    if params.len() != tensors.len() {
        return Err(Error::format(
            path,
            None,
            format!("expected {} tensors, found {}", params.len(), tensors.len()),
        ));
    }
    for (p, (name, shape, values)) in params.iter_mut().zip(tensors) {
        if p.name != name || p.shape() != shape.as_slice() {
            return Err(Error::format(
                path,
                None,
                format!(
                    "tensor {name} {shape:?} does not match expected {} {:?}",
                    p.name,
                    p.shape()
                ),
            ));
        }
        p.value = Tensor::new(shape, values.into_iter().map(|v| T::lit(v as f64)).collect())?;
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AnyModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captioner::Architecture;

    #[test]
    fn round_trip_is_bit_exact() {
        let config = ModelConfig::new(Architecture::Inject, 5, 9)
            .with_image_size(7)
            .with_seed(3);
        let model = CaptionModel::<f32>::build(&config).unwrap();
        let bytes = write_checkpoint(&model);
        assert_eq!(&bytes[..8], b"CAPRNN01");
        let back = read_checkpoint(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, AnyModel::F32(model.clone()));
        assert_eq!(write_checkpoint(&model), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let config = ModelConfig::new(Architecture::Merge, 3, 5).with_image_size(4);
        let model = CaptionModel::<f32>::build(&config).unwrap();
        let mut bytes = write_checkpoint(&model);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        bytes.push(0);
        assert!(read_checkpoint(&bytes, Path::new("x")).is_err());
        bytes[0] = b'X';
        let err = read_checkpoint(&bytes, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }
}
