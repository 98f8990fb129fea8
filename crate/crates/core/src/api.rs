//! Request and response bodies of the HTTP/JSON service.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::captioner::{Architecture, ParamCount, DEFAULT_IMAGE_SIZE};
use crate::data::Split;
use crate::decoding::{DEFAULT_BEAM_WIDTH, DEFAULT_MAX_LEN};
use crate::error::Error;
use crate::metrics::MetricReport;
use crate::nn::Precision;
use crate::training::{EpochRecord, ManifestRow, TrainOptions};

pub const DEFAULT_THRESHOLDS: [usize; 3] = [3, 4, 5];
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const DEFAULT_MIN_FREQ: usize = 3;
pub const DEFAULT_LAYER_SIZE: usize = 256;

fn default_image_size() -> usize {
    DEFAULT_IMAGE_SIZE
}

fn default_thresholds() -> Vec<usize> {
    DEFAULT_THRESHOLDS.to_vec()
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_min_freq() -> usize {
    DEFAULT_MIN_FREQ
}

fn default_layer() -> usize {
    DEFAULT_LAYER_SIZE
}

fn default_beam() -> usize {
    DEFAULT_BEAM_WIDTH
}

fn default_max_len() -> usize {
    DEFAULT_MAX_LEN
}

fn default_split() -> Split {
    Split::Test
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsRequest {
    pub layer_size: usize,
    pub vocab_size: usize,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsResponse {
    pub merge: ParamCount,
    pub inject: ParamCount,
    /// Merge total over inject total.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepRequest {
    /// Dataset directory or `synth:N[:SEED[:WORDS]]`.
    pub dataset: String,
    pub out: PathBuf,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSize {
    pub threshold: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepResponse {
    pub out: PathBuf,
    pub train_images: usize,
    pub val_images: usize,
    pub test_images: usize,
    pub feature_dim: usize,
    pub vocab_sizes: Vec<VocabSize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub dataset: String,
    /// Run directory; receives `run.conf`, checkpoints and the manifest.
    pub out: PathBuf,
    pub architecture: Architecture,
    #[serde(default = "default_layer")]
    pub layer_size: usize,
    #[serde(default = "default_min_freq")]
    pub min_freq: usize,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub options: TrainOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub out: PathBuf,
    pub vocab_size: usize,
    pub runs: Vec<ManifestRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub checkpoint: PathBuf,
    pub dataset: String,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default = "default_beam")]
    pub beam: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Defaults to `<checkpoint stem>.<split>.hyp.tsv` beside the checkpoint.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub hypotheses: PathBuf,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub hypotheses: PathBuf,
    pub dataset: String,
    /// Vocabulary threshold for the usage percentage; defaults to the
    /// `min_freq` of a `run.conf` beside the file, else 3.
    #[serde(default)]
    pub min_freq: Option<usize>,
    /// Defaults to the hypothesis path with `.hyp.tsv` replaced by `.metrics.tsv`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub report: MetricReport,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub grid: PathBuf,
    #[serde(default = "default_split")]
    pub split: Split,
    /// Directory for `report.txt` and `report.csv`; defaults to `grid`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportResponse {
    pub text: String,
    pub csv: String,
    pub text_path: PathBuf,
    pub csv_path: PathBuf,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub checkpoint: PathBuf,
    /// Raw image vector; it is normalised before decoding.
    pub feature: Vec<f32>,
    #[serde(default = "default_beam")]
    pub beam: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub tokens: Vec<String>,
    pub log_prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobProgress {
    pub seed: u64,
    pub record: EpochRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: u64,
    pub state: JobState,
    pub progress: Vec<JobProgress>,
    #[serde(default)]
    pub result: Option<TrainResponse>,
    #[serde(default)]
    pub error: Option<ApiError>,
}

/// Error body of every failed request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Dimension,
    Vocabulary,
    Usage,
    Numeric,
    Config,
    Format,
    Integrity,
    Divergence,
    Io,
    NotFound,
    Internal,
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Dimension { .. } => ErrorKind::Dimension,
            Error::Vocabulary { .. } => ErrorKind::Vocabulary,
            Error::Usage(_) => ErrorKind::Usage,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Config(_) => ErrorKind::Config,
            Error::Format { .. } => ErrorKind::Format,
            Error::Integrity(_) => ErrorKind::Integrity,
            Error::Divergence { .. } => ErrorKind::Divergence,
            Error::Io { .. } => ErrorKind::Io,
        };
        ApiError {
            kind,
            error: e.to_string(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)
    }
}

impl std::error::Error for ApiError {}
