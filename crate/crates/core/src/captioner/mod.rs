//! The inject and merge caption generators.
//!
//! Both share a word embedding (`v × x`), a linear image projection
//! (`i → x`), a single LSTM with state size `x`, and a dense output layer
//! over the vocabulary. They differ only in where the projected image enters:
//!
//! - **inject**: `[embedding ; image]` is the LSTM input at every step, and the
//!   output layer reads the hidden state alone.
//! - **merge**: the LSTM reads embeddings only, and the output layer reads
//!   `[hidden ; image]`.

mod checkpoint;
mod config;
mod count;
mod model;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use config::{Architecture, ModelConfig, DEFAULT_IMAGE_SIZE, GRID_LAYER_SIZES};
pub use count::{count_params, ParamCount};
pub use model::{AnyModel, CaptionModel, DecodeState};
