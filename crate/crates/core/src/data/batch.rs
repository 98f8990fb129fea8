use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{ImageRecord, Vocabulary, END};

pub const DEFAULT_BATCH_SIZE: usize = 50;

/// Captions padded with the end token to a common width. Positions at or
/// beyond a caption's length are never scored.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch {
    pub tokens: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
    /// Row-major `len() × feature_dim`, aligned with `tokens`.
    pub features: Vec<f32>,
    pub feature_dim: usize,
    pub image_ids: Vec<String>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    /// Number of (prefix, next token) pairs the batch contributes to the loss.
    pub fn predicted_tokens(&self) -> usize {
        self.lengths.iter().map(|l| l.saturating_sub(1)).sum()
    }
}

/// Every caption of a set of images, encoded once.
#[derive(Clone, Debug)]
pub struct EncodedCaptions<'a> {
    images: &'a [ImageRecord],
    items: Vec<(usize, Vec<usize>)>,
}

impl<'a> EncodedCaptions<'a> {
    pub fn new(images: &'a [ImageRecord], vocab: &Vocabulary) -> Self {
        let items = images
            .iter()
            .enumerate()
            .flat_map(|(i, im)| im.captions.iter().map(move |c| (i, vocab.encode(&c.tokens))))
            .collect();
        EncodedCaptions { images, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Sum over captions of the number of predicted positions.
    pub fn predicted_tokens(&self) -> usize {
        self.items.iter().map(|(_, t)| t.len() - 1).sum()
    }

    /// Captions in a seed-determined order, cut into batches of `batch_size`.
    pub fn batches(&self, batch_size: usize, seed: u64) -> Result<Vec<Minibatch>> {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.batches_in_order(&order, batch_size)
    }

    /// Captions in corpus order.
    pub fn sequential_batches(&self, batch_size: usize) -> Result<Vec<Minibatch>> {
        let order: Vec<usize> = (0..self.items.len()).collect();
        self.batches_in_order(&order, batch_size)
    }

    fn batches_in_order(&self, order: &[usize], batch_size: usize) -> Result<Vec<Minibatch>> {
        if batch_size == 0 {
            return Err(Error::usage("batch size must be at least 1"));
        }
        let dim = self.images.first().map_or(0, |im| im.feature.len());
        Ok(order
            .chunks(batch_size)
            .map(|chunk| {
                let width = chunk.iter().map(|&k| self.items[k].1.len()).max().unwrap_or(0);
                let mut batch = Minibatch {
                    tokens: Vec::with_capacity(chunk.len()),
                    lengths: Vec::with_capacity(chunk.len()),
                    features: Vec::with_capacity(chunk.len() * dim),
                    feature_dim: dim,
                    image_ids: Vec::with_capacity(chunk.len()),
                };
                for &k in chunk {
                    let (im, tokens) = &self.items[k];
                    let mut row = tokens.clone();
                    row.resize(width, END);
                    batch.tokens.push(row);
                    batch.lengths.push(tokens.len());
                    batch.features.extend_from_slice(&self.images[*im].feature);
                    batch.image_ids.push(self.images[*im].image_id.clone());
                }
                batch
            })
            .collect())
    }
}

/// Shuffles every caption of `images` with `seed` and batches them.
pub fn make_batches(
    images: &[ImageRecord],
    vocab: &Vocabulary,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Minibatch>> {
    EncodedCaptions::new(images, vocab).batches(batch_size, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, CaptionRecord};

    fn images(n_images: usize, per_image: usize) -> Vec<ImageRecord> {
        (0..n_images)
            .map(|i| ImageRecord {
                image_id: format!("img{i}"),
                feature: vec![i as f32, 1.0],
                captions: (0..per_image)
                    .map(|k| CaptionRecord {
                        image_id: format!("img{i}"),
                        caption_id: i * per_image + k,
                        tokens: (0..(k % 4 + 1)).map(|w| format!("w{w}")).collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    fn vocab(ims: &[ImageRecord]) -> Vocabulary {
        build_vocab(
            ims.iter()
                .flat_map(|im| im.captions.iter().map(|c| c.tokens.as_slice())),
            1,
        )
        .unwrap()
    }

    #[test]
    fn thirty_thousand_captions_make_six_hundred_batches() {
        let ims = images(6000, 5);
        let v = vocab(&ims);
        let batches = make_batches(&ims, &v, 50, 1).unwrap();
        assert_eq!(batches.len(), 600);
        assert!(batches.iter().all(|b| b.len() == 50));
    }

    #[test]
    fn partition_covers_every_caption_once() {
        let ims = images(7, 5);
        let v = vocab(&ims);
        let batches = make_batches(&ims, &v, 8, 9).unwrap();
        assert_eq!(batches.iter().map(Minibatch::len).sum::<usize>(), 35);
        assert_eq!(batches.last().unwrap().len(), 35 % 8);
        let mut seen: Vec<(String, Vec<usize>)> = batches
            .iter()
            .flat_map(|b| {
                b.image_ids
                    .iter()
                    .cloned()
                    .zip(b.tokens.iter().zip(&b.lengths).map(|(t, &l)| t[..l].to_vec()))
            })
            .collect();
        let mut expected: Vec<(String, Vec<usize>)> = ims
            .iter()
            .flat_map(|im| im.captions.iter().map(|c| (im.image_id.clone(), v.encode(&c.tokens))))
            .collect();
        seen.sort();
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn same_seed_same_order() {
        let ims = images(10, 5);
        let v = vocab(&ims);
        assert_eq!(
            make_batches(&ims, &v, 7, 3).unwrap(),
            make_batches(&ims, &v, 7, 3).unwrap()
        );
        assert_ne!(
            make_batches(&ims, &v, 7, 3).unwrap(),
            make_batches(&ims, &v, 7, 4).unwrap()
        );
    }

    #[test]
    fn padding_uses_end_and_lengths_are_kept() {
        let ims = images(2, 4);
        let v = vocab(&ims);
        for b in make_batches(&ims, &v, 3, 0).unwrap() {
            let w = b.max_len();
            for (row, &len) in b.tokens.iter().zip(&b.lengths) {
                assert_eq!(row.len(), w);
                assert!(row[len..].iter().all(|&t| t == END));
            }
            assert_eq!(b.features.len(), b.len() * b.feature_dim);
        }
    }
}
