//! Inject and merge LSTM image-caption generators built on a small
//! hand-written numeric kernel.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: arrays, parameters, dense/embedding/LSTM layers, softmax
//!   cross-entropy, Xavier init, Adam and a finite-difference checker.
//! - [`captioner`]: the two conditioning architectures, checkpoints and
//!   closed-form parameter counts.
//! - [`data`]: vocabularies, Karpathy-style caption files, binary feature
//!   files, minibatching and a synthetic grounded corpus.
//! - [`training`]: the epoch loop with validation early stopping and
//!   multi-seed experiments.
//! - [`decoding`]: beam search and greedy decoding.
//! - [`metrics`]: BLEU, ROUGE-L, CIDEr-D and vocabulary usage.
//! - [`report`]: aggregation of runs into side-by-side result tables.
//! - [`pipeline`] and [`api`]: the service operations and their wire types.

pub mod api;
pub mod captioner;
pub mod conf;
pub mod data;
pub mod decoding;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod training;

pub use captioner::{Architecture, CaptionModel, ModelConfig, ParamCount};
pub use error::{Error, Result};
pub use nn::{Parameter, Precision, Real, Tensor};
