//! The operations behind each service endpoint, as plain blocking calls.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use crate::api::{
    CaptionRequest, CaptionResponse, EvaluateRequest, EvaluateResponse, GenerateRequest, GenerateResponse,
    ParamsRequest, ParamsResponse, PrepRequest, PrepResponse, ReportRequest, ReportResponse, TrainRequest,
    TrainResponse, VocabSize, DEFAULT_MIN_FREQ,
};
use crate::captioner::{count_params, load_checkpoint, Architecture, ModelConfig};
use crate::data::{
    feature_index_path, find_caption_file, normalize_feature, write_features, CaptionFile, CaptionImage,
    CaptionSentence, DatasetSource, DatasetSplit, FeatureFile, Split, Vocabulary, CAPTIONS_FILE, FEATURES_FILE,
    VOCAB_SIZES_FILE,
};
use crate::decoding::{caption_image, decode_images, read_hypotheses, write_hypotheses};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, write_report, EvalCorpus};
use crate::report::{build_grid, collect_runs, render_csv, render_text, RunInfo, RUN_CONF_FILE};
use crate::training::{run_experiment_with, EpochRecord, RunSpec};

/// Vocabulary a run was trained with, stored in the run directory.
pub const RUN_VOCAB_FILE: &str = "vocab.txt";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_CSV_FILE: &str = "report.csv";

type CacheKey = (String, Option<SystemTime>, Option<SystemTime>);

/// Executes requests, keeping recently loaded datasets in memory.
#[derive(Default)]
pub struct Pipeline {
    datasets: Mutex<HashMap<String, (CacheKey, Arc<DatasetSplit>)>>,
}

fn modified(path: &Path) -> Option<SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads (or reuses) the corpus named by `spec`.
    pub fn dataset(&self, spec: &str) -> Result<(DatasetSource, Arc<DatasetSplit>)> {
        let source: DatasetSource = spec.parse()?;
        let key: CacheKey = match &source {
            DatasetSource::Dir(dir) => (
                source.to_string(),
                modified(&dir.join(FEATURES_FILE)),
                find_caption_file(dir).ok().and_then(|p| modified(&p)),
            ),
            DatasetSource::Synth { .. } => (source.to_string(), None, None),
        };
        if let Some((k, data)) = self.datasets.lock().expect("dataset cache poisoned").get(&key.0) {
            if *k == key {
                return Ok((source, Arc::clone(data)));
            }
        }
        let data = Arc::new(source.load()?);
        self.datasets
            .lock()
            .expect("dataset cache poisoned")
            .insert(key.0.clone(), (key, Arc::clone(&data)));
        Ok((source, data))
    }

    pub fn params(&self, req: &ParamsRequest) -> Result<ParamsResponse> {
        let count = |arch| {
            let config = ModelConfig::new(arch, req.layer_size, req.vocab_size).with_image_size(req.image_size);
            config.validate().map(|_| count_params(&config))
        };
        let merge = count(Architecture::Merge)?;
        let inject = count(Architecture::Inject)?;
        Ok(ParamsResponse {
            ratio: merge.total as f64 / inject.total as f64,
            merge,
            inject,
        })
    }

    /// Writes a normalised copy of the corpus plus one vocabulary per threshold.
    pub fn prep(&self, req: &PrepRequest) -> Result<PrepResponse> {
        if req.thresholds.is_empty() || req.thresholds.contains(&0) {
            return Err(Error::usage("thresholds must be a non-empty list of positive integers"));
        }
        let (source, data) = self.dataset(&req.dataset)?;
        create_dir(&req.out)?;

        let mut file = CaptionFile {
            images: Vec::new(),
            dataset: Some(match &source {
                DatasetSource::Dir(dir) => dir
                    .file_name()
                    .map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned()),
                DatasetSource::Synth { .. } => source.to_string(),
            }),
        };
        let mut features = FeatureFile {
            names: Vec::new(),
            dim: data.feature_dim,
            values: Vec::new(),
        };
        for split in [Split::Train, Split::Val, Split::Test] {
            for image in data.images(split) {
                file.images.push(CaptionImage {
                    split: split.to_string(),
                    filename: image.image_id.clone(),
                    sentences: image
                        .captions
                        .iter()
                        .map(|c| CaptionSentence {
                            tokens: c.tokens.clone(),
                            sentid: Some(c.caption_id as u64),
                            raw: None,
                        })
                        .collect(),
                    imgid: None,
                });
                features.names.push(image.image_id.clone());
                features.values.extend(normalize_feature(&image.feature)?);
            }
        }
        let captions_path = req.out.join(CAPTIONS_FILE);
        let json = serde_json::to_vec_pretty(&file).map_err(|e| Error::Integrity(format!("caption file: {e}")))?;
        write_file(&captions_path, json)?;
        write_features(req.out.join(FEATURES_FILE), &features)?;

        let mut vocab_sizes = Vec::new();
        let mut summary = String::from("threshold\tvocab_size\n");
        for &threshold in &req.thresholds {
            let vocab = crate::data::build_vocab(data.train_captions(), threshold)?;
            vocab.save(DatasetSource::vocab_path(&req.out, threshold))?;
            summary.push_str(&format!("{threshold}\t{}\n", vocab.len()));
            vocab_sizes.push(VocabSize {
                threshold,
                size: vocab.len(),
            });
        }
        write_file(&req.out.join(VOCAB_SIZES_FILE), summary)?;
        let (train_images, val_images, test_images) = data.split_sizes();
        Ok(PrepResponse {
            out: req.out.clone(),
            train_images,
            val_images,
            test_images,
            feature_dim: data.feature_dim,
            vocab_sizes,
        })
    }

    /// Trains one configuration once per seed into `req.out`.
    pub fn train(&self, req: &TrainRequest, progress: &(dyn Fn(u64, &EpochRecord) + Sync)) -> Result<TrainResponse> {
        let (source, data) = self.dataset(&req.dataset)?;
        let vocab = source.vocabulary(&data, req.min_freq)?;
        let config = ModelConfig::new(req.architecture, req.layer_size, vocab.len())
            .with_image_size(data.feature_dim)
            .with_min_freq(req.min_freq)
            .with_precision(req.precision);
        config.validate()?;
        create_dir(&req.out)?;
        RunInfo {
            architecture: req.architecture,
            layer_size: req.layer_size,
            min_freq: req.min_freq,
            vocab_size: vocab.len(),
            precision: req.precision,
            seeds: req.seeds.clone(),
            dataset: req.dataset.clone(),
        }
        .save(&req.out)?;
        vocab.save(req.out.join(RUN_VOCAB_FILE))?;
        let spec = RunSpec {
            config,
            dataset: &data,
            vocab: &vocab,
            seeds: req.seeds.clone(),
            out_dir: req.out.clone(),
            options: req.options,
        };
        let runs = run_experiment_with(&spec, progress)?;
        Ok(TrainResponse {
            out: req.out.clone(),
            vocab_size: vocab.len(),
            runs,
        })
    }

    /// Vocabulary saved beside `checkpoint` by training, else the dataset's.
    fn run_vocabulary(
        &self,
        checkpoint_dir: &Path,
        threshold: usize,
        fallback: Option<(&DatasetSource, &DatasetSplit)>,
    ) -> Result<Vocabulary> {
        let path = checkpoint_dir.join(RUN_VOCAB_FILE);
        if path.is_file() {
            return Vocabulary::load(path, threshold);
        }
        match fallback {
            Some((source, data)) => source.vocabulary(data, threshold),
            None => Err(Error::usage(format!(
                "no {RUN_VOCAB_FILE} beside the checkpoint in {}",
                checkpoint_dir.display()
            ))),
        }
    }

    pub fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        let model = load_checkpoint(&req.checkpoint)?;
        let (source, data) = self.dataset(&req.dataset)?;
        let config = model.config().clone();
        let dir = parent_dir(&req.checkpoint);
        let vocab = self.run_vocabulary(&dir, config.min_freq, Some((&source, &data)))?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Integrity(format!(
                "checkpoint expects {} vocabulary entries but the vocabulary has {}",
                config.vocab_size,
                vocab.len()
            )));
        }
        if data.feature_dim != config.image_size {
            return Err(Error::Integrity(format!(
                "checkpoint expects {}-dimensional images but the dataset has {}",
                config.image_size, data.feature_dim
            )));
        }
        let hyps = decode_images(&model, data.images(req.split), &vocab, req.beam, req.max_len)?;
        let out = req.out.clone().unwrap_or_else(|| {
            let stem = req
                .checkpoint
                .file_stem()
                .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
            dir.join(format!("{stem}.{}.hyp.tsv", req.split))
        });
        write_hypotheses(&out, &hyps)?;
        Ok(GenerateResponse {
            hypotheses: out,
            count: hyps.len(),
        })
    }

    pub fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse> {
        let hyps = read_hypotheses(&req.hypotheses)?;
        let (source, data) = self.dataset(&req.dataset)?;
        let dir = parent_dir(&req.hypotheses);
        let run_min_freq = match dir.join(RUN_CONF_FILE).is_file() {
            true => Some(RunInfo::load(&dir)?.min_freq),
            false => None,
        };
        let threshold = req.min_freq.or(run_min_freq).unwrap_or(DEFAULT_MIN_FREQ);
        let vocab = match req.min_freq {
            Some(t) if Some(t) != run_min_freq => source.vocabulary(&data, t)?,
            _ => self.run_vocabulary(&dir, threshold, Some((&source, &data)))?,
        };
        let corpus = EvalCorpus::from_hypotheses(&hyps, &data)?;
        let report = evaluate(&corpus, &vocab)?;
        let out = req.out.clone().unwrap_or_else(|| {
            let name = req
                .hypotheses
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let stem = name
                .strip_suffix(".hyp.tsv")
                .or_else(|| name.strip_suffix(".tsv"))
                .unwrap_or(&name);
            dir.join(format!("{stem}.metrics.tsv"))
        });
        write_report(&out, &report)?;
        Ok(EvaluateResponse { report, path: out })
    }

    pub fn report(&self, req: &ReportRequest) -> Result<ReportResponse> {
        let runs = collect_runs(&req.grid, req.split)?;
        let cells = build_grid(&runs);
        let text = render_text(&cells);
        let csv = render_csv(&cells);
        let out = req.out.clone().unwrap_or_else(|| req.grid.clone());
        create_dir(&out)?;
        let text_path = out.join(REPORT_TEXT_FILE);
        let csv_path = out.join(REPORT_CSV_FILE);
        write_file(&text_path, &text)?;
        write_file(&csv_path, &csv)?;
        Ok(ReportResponse {
            text,
            csv,
            text_path,
            csv_path,
            cells: cells.len(),
        })
    }

    pub fn caption(&self, req: &CaptionRequest) -> Result<CaptionResponse> {
        let model = load_checkpoint(&req.checkpoint)?;
        let config = model.config();
        let vocab = self.run_vocabulary(&parent_dir(&req.checkpoint), config.min_freq, None)?;
        let feature = normalize_feature(&req.feature)?;
        let result = caption_image(&model, &feature, req.beam, req.max_len)?;
        Ok(CaptionResponse {
            tokens: vocab.decode(&result.tokens),
            log_prob: result.log_prob,
        })
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Whether `dir` already holds a prepared corpus.
pub fn is_prepared(dir: &Path) -> bool {
    let features = dir.join(FEATURES_FILE);
    dir.join(CAPTIONS_FILE).is_file() && features.is_file() && feature_index_path(&features).is_file()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainOptions;

    #[test]
    fn params_ratio() {
        let p = Pipeline::new();
        let r = p
            .params(&ParamsRequest {
                layer_size: 512,
                vocab_size: 2539,
                image_size: 4096,
            })
            .unwrap();
        assert_eq!(r.merge.total, 8_099_307);
        assert_eq!(r.inject.total, 7_847_915);
        assert!((r.ratio - 1.032).abs() < 0.005);
        assert!(p
            .params(&ParamsRequest {
                layer_size: 0,
                vocab_size: 10,
                image_size: 4
            })
            .is_err());
    }

    #[test]
    fn end_to_end_on_a_synthetic_corpus() {
        let p = Pipeline::new();
        let tmp = tempfile::tempdir().unwrap();
        let data_dir = tmp.path().join("data");
        let prep = p
            .prep(&PrepRequest {
                dataset: "synth:16:2".into(),
                out: data_dir.clone(),
                thresholds: vec![1, 2],
            })
            .unwrap();
        assert_eq!((prep.train_images, prep.val_images, prep.test_images), (12, 2, 2));
        assert!(is_prepared(&data_dir));
        let first = fs::read(data_dir.join(FEATURES_FILE)).unwrap();
        p.prep(&PrepRequest {
            dataset: "synth:16:2".into(),
            out: data_dir.clone(),
            thresholds: vec![1, 2],
        })
        .unwrap();
        assert_eq!(first, fs::read(data_dir.join(FEATURES_FILE)).unwrap());

        let dataset = data_dir.to_string_lossy().into_owned();
        let grid = tmp.path().join("grid");
        for arch in Architecture::ALL {
            let run = p
                .train(
                    &TrainRequest {
                        dataset: dataset.clone(),
                        out: grid.join(arch.as_str()),
                        architecture: arch,
                        layer_size: 8,
                        min_freq: 1,
                        precision: Default::default(),
                        seeds: vec![1, 2],
                        options: TrainOptions {
                            max_epochs: 2,
                            batch_size: 10,
                            ..Default::default()
                        },
                    },
                    &|_, _| {},
                )
                .unwrap();
            for row in &run.runs {
                let generated = p
                    .generate(&GenerateRequest {
                        checkpoint: grid.join(arch.as_str()).join(&row.checkpoint),
                        dataset: dataset.clone(),
                        split: Split::Test,
                        beam: 2,
                        max_len: 8,
                        out: None,
                    })
                    .unwrap();
                assert_eq!(generated.count, 2);
                let eval = p
                    .evaluate(&EvaluateRequest {
                        hypotheses: generated.hypotheses.clone(),
                        dataset: dataset.clone(),
                        min_freq: None,
                        out: None,
                    })
                    .unwrap();
                assert!(eval.path.ends_with(format!("seed_{}.test.metrics.tsv", row.seed)));
            }
        }
        let report = p
            .report(&ReportRequest {
                grid: grid.clone(),
                split: Split::Test,
                out: None,
            })
            .unwrap();
        assert_eq!(report.cells, 1);
        assert!(!report.text.contains("incomplete"), "{}", report.text);
        assert!(grid.join(REPORT_CSV_FILE).is_file());

        let caption = p
            .caption(&CaptionRequest {
                checkpoint: grid.join("merge").join("seed_1.ckpt"),
                feature: vec![0.5; 32],
                beam: 3,
                max_len: 10,
            })
            .unwrap();
        assert!(caption.log_prob.is_finite());
    }
}
