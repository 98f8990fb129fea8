use serde::{Deserialize, Serialize};

use super::{Architecture, ModelConfig};

/// Weight counts per component, biases included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub embedding: u64,
    pub image_proj: u64,
    pub lstm: u64,
    pub output: u64,
    pub total: u64,
}

/// Closed-form parameter count of the model a config describes.
pub fn count_params(config: &ModelConfig) -> ParamCount {
    let x = config.layer_size as u64;
    let v = config.vocab_size as u64;
    let i = config.image_size as u64;
    let embedding = v * x;
    let image_proj = (i + 1) * x;
    let (lstm, output) = match config.architecture {
        Architecture::Inject => (4 * (2 * x * x + x * x + x), (x + 1) * v),
        Architecture::Merge => (4 * (x * x + x * x + x), (2 * x + 1) * v),
    };
    ParamCount {
        embedding,
        image_proj,
        lstm,
        output,
        total: embedding + image_proj + lstm + output,
    }
}
