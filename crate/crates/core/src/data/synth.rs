use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{normalize_feature, CaptionRecord, DatasetSplit, ImageRecord};

const POOLS: [&[&str]; 4] = [
    &[
        "red", "blue", "green", "yellow", "black", "white", "brown", "pink", "orange", "purple", "gray", "golden",
    ],
    &[
        "dog", "cat", "bird", "horse", "child", "man", "woman", "boy", "girl", "cow", "sheep", "goat",
    ],
    &[
        "runs", "sits", "jumps", "walks", "sleeps", "plays", "swims", "stands", "climbs", "rests", "eats", "waits",
    ],
    &[
        "grass", "beach", "street", "park", "snow", "water", "field", "road", "river", "hill", "room", "yard",
    ],
];

/// Parameters of [`synth_corpus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_images: usize,
    /// Number of slot words the grammar can choose from.
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub captions_per_image: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_images: usize, vocab_size: usize, seed: u64) -> Self {
        SynthConfig {
            n_images,
            vocab_size,
            feature_dim: 32,
            captions_per_image: 5,
            seed,
        }
    }

    pub fn with_feature_dim(mut self, dim: usize) -> Self {
        self.feature_dim = dim;
        self
    }

    fn pools(&self) -> Vec<Vec<String>> {
        let slots = self.vocab_size.clamp(1, POOLS.len());
        (0..slots)
            .map(|k| {
                let size = self.vocab_size / slots + usize::from(k < self.vocab_size % slots);
                (0..size)
                    .map(|j| {
                        let base = POOLS[k][j % POOLS[k].len()];
                        match j / POOLS[k].len() {
                            0 => base.to_owned(),
                            n => format!("{base}{n}"),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn bits_for(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// Caption of the template `a <colour> <animal> <verb> in the <place>`; each
/// slot word is picked by the signs of its own block of feature coordinates.
fn caption_for(feature: &[f32], pools: &[Vec<String>]) -> Vec<String> {
    let mut words = Vec::with_capacity(pools.len());
    let mut offset = 0;
    for pool in pools {
        let bits = bits_for(pool.len());
        let mut code = 0usize;
        for b in 0..bits {
            if feature[(offset + b) % feature.len()] > 0.0 {
                code |= 1 << b;
            }
        }
        offset += bits;
        words.push(pool[code % pool.len()].clone());
    }
    let mut caption = vec!["a".to_owned()];
    caption.extend(words.iter().take(3).cloned());
    if let Some(place) = words.get(3) {
        caption.extend(["in".to_owned(), "the".to_owned(), place.clone()]);
    }
    caption
}

/// A corpus of random unit image vectors whose captions are a deterministic
/// function of the vectors. Every caption of an image is identical. Splits are
/// roughly 6:1:1 (one validation image and one test image at `n = 8`).
pub fn synth_corpus(config: SynthConfig) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pools = config.pools();
    let n = config.n_images.max(2);
    let held_out = (n / 8).max(1);
    let n_val = held_out;
    let n_test = if n >= 3 { held_out.min(n - n_val - 1) } else { 0 };
    let dim = config.feature_dim.max(1);

    let mut split = DatasetSplit {
        feature_dim: dim,
        ..Default::default()
    };
    let mut caption_id = 0;
    for i in 0..n {
        let raw: Vec<f32> = loop {
            let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            if v.iter().any(|&x| x != 0.0) {
                break v;
            }
        };
        let feature = normalize_feature(&raw).expect("non-zero vector");
        let tokens = caption_for(&feature, &pools);
        let image_id = format!("synth_{i:04}.jpg");
        let captions = (0..config.captions_per_image)
            .map(|_| {
                caption_id += 1;
                CaptionRecord {
                    image_id: image_id.clone(),
                    caption_id: caption_id - 1,
                    tokens: tokens.clone(),
                }
            })
            .collect();
        let record = ImageRecord {
            image_id,
            feature,
            captions,
        };
        if i < n - n_val - n_test {
            split.train.push(record);
        } else if i < n - n_test {
            split.val.push(record);
        } else {
            split.test.push(record);
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_images_split_six_one_one() {
        let ds = synth_corpus(SynthConfig::new(8, 16, 1));
        assert_eq!(ds.split_sizes(), (6, 1, 1));
        assert!(ds.all_images().all(|im| im.captions.len() == 5));
    }

    #[test]
    fn regeneration_is_identical() {
        assert_eq!(
            synth_corpus(SynthConfig::new(8, 16, 4)),
            synth_corpus(SynthConfig::new(8, 16, 4))
        );
        assert_ne!(
            synth_corpus(SynthConfig::new(8, 16, 4)),
            synth_corpus(SynthConfig::new(8, 16, 5))
        );
    }

    #[test]
    fn captions_follow_feature_signs() {
        let ds = synth_corpus(SynthConfig::new(40, 16, 2));
        let pools = SynthConfig::new(40, 16, 2).pools();
        for im in ds.all_images() {
            assert_eq!(im.captions[0].tokens, caption_for(&im.feature, &pools));
            let mut flipped = im.feature.clone();
            flipped[0] = -flipped[0];
            assert_ne!(caption_for(&flipped, &pools), im.captions[0].tokens);
        }
    }

    #[test]
    fn word_pool_sizes_sum_to_vocab_size() {
        for v in [1, 4, 7, 16, 50, 100] {
            let pools = SynthConfig::new(2, v, 0).pools();
            assert_eq!(pools.iter().map(Vec::len).sum::<usize>(), v);
            let mut all: Vec<&String> = pools.iter().flatten().collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), v);
        }
    }

    #[test]
    fn two_images_is_the_minimum() {
        let ds = synth_corpus(SynthConfig::new(2, 8, 0));
        assert_eq!(ds.split_sizes(), (1, 1, 0));
    }
}
