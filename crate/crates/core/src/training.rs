//! Epoch loop with validation early stopping, and multi-seed experiments.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::captioner::{save_checkpoint, CaptionModel, ModelConfig};
use crate::data::{DatasetSplit, EncodedCaptions, ImageRecord, Split, Vocabulary, DEFAULT_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, ParamSet, Precision, Real};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const DEFAULT_MAX_EPOCHS: usize = 100;
pub const DEFAULT_MIN_EPOCHS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Epochs that must complete before a validation rise can stop training.
    pub min_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub early_stopping: bool,
    /// Stop as soon as the mean per-token training loss falls below this.
    pub target_train_loss: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: DEFAULT_MAX_EPOCHS,
            min_epochs: DEFAULT_MIN_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            early_stopping: true,
            target_train_loss: None,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Losses are sums of token cross-entropies; the token counts give means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_tokens: usize,
    pub val_loss: Option<f64>,
}

impl EpochRecord {
    pub fn mean_train_loss(&self) -> f64 {
        self.train_loss / self.train_tokens.max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    /// Parameters after `best_epoch`.
    pub best: CaptionModel<T>,
    pub history: Vec<EpochRecord>,
}

/// Scores the model after each epoch; lower is better.
pub trait Validator<T> {
    fn validate(&mut self, model: &CaptionModel<T>, epoch: usize) -> Result<Option<f64>>;
}

/// Sum cross-entropy over every caption of a fixed image set.
pub struct SplitValidator<'a> {
    captions: EncodedCaptions<'a>,
}

impl<'a> SplitValidator<'a> {
    pub fn new(images: &'a [ImageRecord], vocab: &Vocabulary) -> Self {
        SplitValidator {
            captions: EncodedCaptions::new(images, vocab),
        }
    }
}

impl<T: Real> Validator<T> for SplitValidator<'_> {
    fn validate(&mut self, model: &CaptionModel<T>, _epoch: usize) -> Result<Option<f64>> {
        if self.captions.is_empty() {
            return Ok(None);
        }
        validation_loss(model, &self.captions).map(Some)
    }
}

/// Plays back a fixed list of validation losses.
pub struct ScriptedValidator(pub Vec<f64>);

impl<T> Validator<T> for ScriptedValidator {
    fn validate(&mut self, _model: &CaptionModel<T>, epoch: usize) -> Result<Option<f64>> {
        Ok(self.0.get(epoch - 1).copied())
    }
}

fn validation_loss<T: Real>(model: &CaptionModel<T>, captions: &EncodedCaptions) -> Result<f64> {
    let mut total = 0.0;
    for batch in captions.sequential_batches(DEFAULT_BATCH_SIZE)? {
        total += model.batch_loss(&batch)?;
    }
    Ok(total)
}

/// Sum cross-entropy of every caption of `images`; the model is untouched.
pub fn validate<T: Real>(model: &CaptionModel<T>, images: &[ImageRecord], vocab: &Vocabulary) -> Result<f64> {
    validation_loss(model, &EncodedCaptions::new(images, vocab))
}

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ epoch as u64
}

/// Trains a fresh model from `config` on the training split.
pub fn train<T: Real>(
    config: &ModelConfig,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
    options: &TrainOptions,
) -> Result<TrainState<T>> {
    let mut validator = SplitValidator::new(dataset.images(Split::Val), vocab);
    train_with(config, dataset, vocab, options, &mut validator, |_| {})
}

/// [`train`] with a custom validator and a per-epoch callback.
pub fn train_with<T: Real>(
    config: &ModelConfig,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
    options: &TrainOptions,
    validator: &mut dyn Validator<T>,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainState<T>> {
    options.validate()?;
    if config.vocab_size != vocab.len() {
        return Err(Error::config(format!(
            "model vocabulary size {} differs from the vocabulary's {}",
            config.vocab_size,
            vocab.len()
        )));
    }
    if dataset.feature_dim != config.image_size {
        return Err(Error::config(format!(
            "model image size {} differs from the dataset's feature size {}",
            config.image_size, dataset.feature_dim
        )));
    }
    let captions = EncodedCaptions::new(dataset.images(Split::Train), vocab);
    if captions.is_empty() {
        return Err(Error::usage("the training split has no captions"));
    }

    let mut model = CaptionModel::<T>::build(config)?;
    let mut state = TrainState {
        epochs: 0,
        best_epoch: 0,
        best_val_loss: None,
        best: model.clone(),
        history: Vec::new(),
    };
    let mut step = 0u64;
    for epoch in 1..=options.max_epochs {
        let mut train_loss = 0.0;
        for (b, batch) in captions
            .batches(options.batch_size, shuffle_seed(config.seed, epoch))?
            .iter()
            .enumerate()
        {
            model.zero_grads();
            let loss = model.batch_loss_backward(batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            step += 1;
            adam_step(model.params_mut(), step, &options.adam)?;
            train_loss += loss;
        }
        let val_loss = validator.validate(&model, epoch)?;
        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: 0,
                    loss: v,
                });
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_tokens: captions.predicted_tokens(),
            val_loss,
        };
        state.history.push(record);
        state.epochs = epoch;
        progress(&record);

        let previous = state
            .history
            .len()
            .checked_sub(2)
            .and_then(|i| state.history[i].val_loss);
        let improved = match (val_loss, state.best_val_loss) {
            (Some(v), Some(best)) => v < best,
            (Some(_), None) => true,
            (None, _) => true,
        };
        let worsened = matches!((val_loss, previous), (Some(v), Some(p)) if v > p);
        if options.early_stopping && worsened && epoch >= options.min_epochs {
            break;
        }
        if improved || !options.early_stopping {
            state.best_epoch = epoch;
            state.best_val_loss = val_loss.or(state.best_val_loss);
            state.best = model.clone();
        }
        if options.target_train_loss.is_some_and(|t| record.mean_train_loss() < t) {
            break;
        }
    }
    state.best.zero_grads();
    Ok(state)
}

/// One configuration trained once per seed.
#[derive(Clone, Debug)]
pub struct RunSpec<'a> {
    pub config: ModelConfig,
    pub dataset: &'a DatasetSplit,
    pub vocab: &'a Vocabulary,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub options: TrainOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub seed: u64,
    pub best_val_loss: Option<f64>,
    pub epochs: usize,
    /// Relative to the run directory.
    pub checkpoint: PathBuf,
}

pub fn checkpoint_name(seed: u64) -> String {
    format!("seed_{seed}.ckpt")
}

pub fn history_name(seed: u64) -> String {
    format!("seed_{seed}.history.tsv")
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from("epoch\ttrain_loss\tmean_train_loss\tval_loss\n");
    for r in history {
        let val = r.val_loss.map_or_else(|| "na".to_owned(), |v| format!("{v:.6}"));
        text.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{val}\n",
            r.epoch,
            r.train_loss,
            r.mean_train_loss()
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-epoch callback shared by the parallel runs of an experiment.
pub type Progress<'a> = &'a (dyn Fn(u64, &EpochRecord) + Sync);

fn run_seed<T: Real>(spec: &RunSpec, seed: u64, progress: Progress) -> Result<ManifestRow> {
    let config = spec.config.clone().with_seed(seed);
    let mut validator = SplitValidator::new(spec.dataset.images(Split::Val), spec.vocab);
    let state = train_with::<T>(&config, spec.dataset, spec.vocab, &spec.options, &mut validator, |r| {
        progress(seed, r)
    })?;
    let checkpoint = PathBuf::from(checkpoint_name(seed));
    save_checkpoint(&state.best, spec.out_dir.join(&checkpoint))?;
    write_history(&spec.out_dir.join(history_name(seed)), &state.history)?;
    Ok(ManifestRow {
        seed,
        best_val_loss: state.best_val_loss,
        epochs: state.epochs,
        checkpoint,
    })
}

/// Trains every seed in parallel, writing `seed_<s>.ckpt`, its history and
/// a manifest of the completed runs. Failed runs leave completed ones in place.
pub fn run_experiment(spec: &RunSpec) -> Result<Vec<ManifestRow>> {
    run_experiment_with(spec, &|_, _| {})
}

/// [`run_experiment`] reporting every finished epoch to `progress`.
pub fn run_experiment_with(spec: &RunSpec, progress: Progress) -> Result<Vec<ManifestRow>> {
    if spec.seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    if spec.seeds.iter().collect::<BTreeSet<_>>().len() != spec.seeds.len() {
        return Err(Error::config(format!("seeds must be distinct, got {:?}", spec.seeds)));
    }
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let results: Vec<Result<ManifestRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || match spec.config.precision {
                    Precision::F32 => run_seed::<f32>(spec, seed, progress),
                    Precision::F64 => run_seed::<f64>(spec, seed, progress),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    write_manifest(&spec.out_dir.join(MANIFEST_FILE), &rows)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        let loss = r.best_val_loss.map_or_else(|| "na".to_owned(), |v| v.to_string());
        text.push_str(&format!(
            "{}\t{loss}\t{}\t{}\n",
            r.seed,
            r.epochs,
            r.checkpoint.display()
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for line in text.split_terminator('\n') {
        let bad = |what: &str| Error::format(path, Some(offset), format!("{what} in manifest line {line:?}"));
        let fields: Vec<&str> = line.split('\t').collect();
        let [seed, loss, epochs, ckpt] = fields[..] else {
            return Err(bad("expected 4 tab-separated fields"));
        };
        rows.push(ManifestRow {
            seed: seed.parse().map_err(|_| bad("bad seed"))?,
            best_val_loss: match loss {
                "na" => None,
                v => Some(v.parse().map_err(|_| bad("bad loss"))?),
            },
            epochs: epochs.parse().map_err(|_| bad("bad epoch count"))?,
            checkpoint: PathBuf::from(ckpt),
        });
        offset += line.len() as u64 + 1;
    }
    Ok(rows)
}
