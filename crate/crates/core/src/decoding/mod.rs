//! Caption generation by beam search over next-token log-probabilities.

mod beam;
mod hypfile;

pub use beam::{beam_search, greedy_decode, BeamResult, ImageScorer, StepScorer, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_LEN};
pub use hypfile::{read_hypotheses, write_hypotheses, Hypothesis};

use crate::captioner::{AnyModel, CaptionModel};
use crate::data::{ImageRecord, Vocabulary};
use crate::error::Result;
use crate::nn::Real;

/// Beam-decodes one image with a model of any precision.
pub fn caption_image(model: &AnyModel, feature: &[f32], width: usize, max_len: usize) -> Result<BeamResult> {
    fn run<T: Real>(m: &CaptionModel<T>, feature: &[f32], width: usize, max_len: usize) -> Result<BeamResult> {
        let image: Vec<T> = feature.iter().map(|&v| T::lit(v as f64)).collect();
        beam_search(&ImageScorer::new(m, &image), width, max_len)
    }
    match model {
        AnyModel::F32(m) => run(m, feature, width, max_len),
        AnyModel::F64(m) => run(m, feature, width, max_len),
    }
}

/// Decodes every image, spreading the work over the available cores; output
/// order follows `images`.
pub fn decode_images(
    model: &AnyModel,
    images: &[ImageRecord],
    vocab: &Vocabulary,
    width: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(images.len().max(1));
    let chunk = images.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<Hypothesis>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = images
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|im| {
                            let result = caption_image(model, &im.feature, width, max_len)?;
                            Ok(Hypothesis {
                                image_id: im.image_id.clone(),
                                tokens: vocab.decode(&result.tokens),
                            })
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("decoder thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(images.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
