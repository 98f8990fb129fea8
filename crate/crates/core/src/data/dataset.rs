use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;

use super::{read_caption_file, read_features};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            // the COCO distribution's "restval" images are training images
            "train" | "restval" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::usage(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: String,
    pub caption_id: usize,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub feature: Vec<f32>,
    pub captions: Vec<CaptionRecord>,
}

/// Train/validation/test partitions of one corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<ImageRecord>,
    pub val: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
    pub feature_dim: usize,
}

impl DatasetSplit {
    pub fn images(&self, split: Split) -> &[ImageRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn images_mut(&mut self, split: Split) -> &mut Vec<ImageRecord> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    /// Token lists of every training caption.
    pub fn train_captions(&self) -> impl Iterator<Item = &[String]> {
        self.train
            .iter()
            .flat_map(|im| im.captions.iter().map(|c| c.tokens.as_slice()))
    }

    pub fn split_sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn all_images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn find(&self, image_id: &str) -> Option<&ImageRecord> {
        self.all_images().find(|im| im.image_id == image_id)
    }
}

/// Scales `vector` to unit Euclidean length.
pub fn normalize_feature<T: Real>(vector: &[T]) -> Result<Vec<T>> {
    let norm = vector.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numeric(format!("cannot normalize a vector of norm {norm}")));
    }
    Ok(vector.iter().map(|v| T::lit(v.as_f64() / norm)).collect())
}

/// Reads a caption file and a feature file, normalising every feature row.
pub fn load_dataset(caption_path: impl AsRef<Path>, feature_path: impl AsRef<Path>) -> Result<DatasetSplit> {
    let captions = read_caption_file(caption_path.as_ref())?;
    let features = read_features(feature_path.as_ref())?;
    let rows: HashMap<&str, usize> = features
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut split = DatasetSplit {
        feature_dim: features.dim,
        ..Default::default()
    };
    let mut caption_id = 0;
    for image in &captions.images {
        let which: Split = image.split.parse()?;
        let Some(&row) = rows.get(image.filename.as_str()) else {
            return Err(Error::Integrity(format!(
                "image {} has no row in {}",
                image.filename,
                feature_path.as_ref().display()
            )));
        };
        let feature = normalize_feature(features.row(row))
            .map_err(|e| Error::Numeric(format!("feature of {}: {e}", image.filename)))?;
        let mut records = Vec::with_capacity(image.sentences.len());
        for sentence in &image.sentences {
            let id = caption_id;
            caption_id += 1;
            if sentence.tokens.is_empty() {
                continue;
            }
            records.push(CaptionRecord {
                image_id: image.filename.clone(),
                caption_id: id,
                tokens: sentence.tokens.clone(),
            });
        }
        split.images_mut(which).push(ImageRecord {
            image_id: image.filename.clone(),
            feature,
            captions: records,
        });
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_features, CaptionFile, CaptionImage, CaptionSentence, FeatureFile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_four_five() {
        let v = normalize_feature(&[3.0f64, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unit_vector_is_unchanged() {
        let u = [0.6f64, 0.8, 0.0];
        let v = normalize_feature(&u).unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_vector_is_a_numeric_error() {
        assert!(matches!(normalize_feature(&[0.0f32; 5]), Err(Error::Numeric(_))));
    }

    #[test]
    fn random_vectors_come_out_unit_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let dim = rng.random_range(1..64);
            let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let n = normalize_feature(&v).unwrap();
            let norm = n.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "{norm}");
        }
    }

    fn write_fixture(dir: &Path, with_missing: bool) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut images = Vec::new();
        for (i, split) in ["train", "train", "val", "test"].iter().enumerate() {
            images.push(CaptionImage {
                split: split.to_string(),
                filename: format!("{i}.jpg"),
                sentences: (0..5)
                    .map(|k| CaptionSentence {
                        tokens: vec!["a".into(), format!("w{k}")],
                        sentid: None,
                        raw: None,
                    })
                    .collect(),
                imgid: Some(i as u64),
            });
        }
        let cap_path = dir.join("captions.json");
        std::fs::write(
            &cap_path,
            serde_json::to_vec(&CaptionFile { images, dataset: None }).unwrap(),
        )
        .unwrap();
        let n = if with_missing { 3 } else { 4 };
        let feat = FeatureFile {
            names: (0..n).map(|i| format!("{i}.jpg")).collect(),
            dim: 3,
            values: (0..n * 3).map(|v| v as f32 + 1.0).collect(),
        };
        let feat_path = dir.join("features.bin");
        write_features(&feat_path, &feat).unwrap();
        (cap_path, feat_path)
    }

    #[test]
    fn loads_splits_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let (c, f) = write_fixture(dir.path(), false);
        let ds = load_dataset(&c, &f).unwrap();
        assert_eq!(ds.split_sizes(), (2, 1, 1));
        assert_eq!(ds.feature_dim, 3);
        for im in ds.all_images() {
            assert_eq!(im.captions.len(), 5);
            let n: f64 = im.feature.iter().map(|&x| (x as f64).powi(2)).sum();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn image_without_features_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let (c, f) = write_fixture(dir.path(), true);
        assert!(matches!(load_dataset(&c, &f), Err(Error::Integrity(_))));
    }

    #[test]
    fn nonexistent_path_is_a_file_error() {
        assert!(matches!(
            load_dataset("/nonexistent/c.json", "/nonexistent/f.bin"),
            Err(Error::Io { .. })
        ));
    }
}
