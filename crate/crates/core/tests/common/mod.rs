//! Helpers shared by the integration tests.

#![allow(dead_code)]

use capgen_core::metrics::{EvalCorpus, EvalEntry};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 10] = ["a", "dog", "cat", "runs", "on", "the", "grass", "red", "ball", "in"];

fn sentence(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
    let len = rng.random_range(min..=max);
    (0..len)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_owned())
        .collect()
}

/// A hypothesis derived from `source` by random substitutions, deletions and
/// insertions, so that it overlaps its references to a varying degree.
fn mutate(rng: &mut ChaCha8Rng, source: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for w in source {
        match rng.random_range(0..10) {
            0 => {}
            1 | 2 => out.push(WORDS[rng.random_range(0..WORDS.len())].to_owned()),
            3 => {
                out.push(w.clone());
                out.push(WORDS[rng.random_range(0..WORDS.len())].to_owned());
            }
            _ => out.push(w.clone()),
        }
    }
    if out.is_empty() {
        out.push(WORDS[0].to_owned());
    }
    out
}

/// 2 to 8 images, five references of 3 to 12 words each, hypotheses of
/// varying overlap.
pub fn random_corpus(seed: u64) -> EvalCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let entries = (0..n)
        .map(|i| {
            let references: Vec<Vec<String>> = (0..5).map(|_| sentence(&mut rng, 3, 12)).collect();
            let hypothesis = if rng.random_bool(0.2) {
                sentence(&mut rng, 1, 12)
            } else {
                let source = references[rng.random_range(0..5)].clone();
                mutate(&mut rng, &source)
            };
            EvalEntry {
                image_id: format!("img{i}"),
                hypothesis,
                references,
            }
        })
        .collect();
    EvalCorpus::new(entries).expect("every image has references")
}

pub fn permute_images(corpus: &EvalCorpus, seed: u64) -> EvalCorpus {
    let mut entries = corpus.entries().to_vec();
    entries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    EvalCorpus::new(entries).unwrap()
}

pub fn permute_references(corpus: &EvalCorpus, seed: u64) -> EvalCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = corpus
        .entries()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.references.shuffle(&mut rng);
            e
        })
        .collect();
    EvalCorpus::new(entries).unwrap()
}

/// Copies `corpus` with the hypothesis of image `index` appended to its references.
pub fn add_exact_reference(corpus: &EvalCorpus, index: usize) -> EvalCorpus {
    let mut entries = corpus.entries().to_vec();
    let hyp = entries[index].hypothesis.clone();
    entries[index].references.push(hyp);
    EvalCorpus::new(entries).unwrap()
}

/// Single-image sub-corpus.
pub fn only(corpus: &EvalCorpus, index: usize) -> EvalCorpus {
    EvalCorpus::new(vec![corpus.entries()[index].clone()]).unwrap()
}

/// A stub next-token model: log-probabilities are a fixed hash of the prefix.
#[derive(Clone, Copy, Debug)]
pub struct HashScorer {
    pub vocab: usize,
    pub salt: u64,
    /// Logits are drawn from `[0, spread)`.
    pub spread: f64,
}

impl HashScorer {
    pub fn new(vocab: usize, salt: u64) -> Self {
        HashScorer {
            vocab,
            salt,
            spread: 4.0,
        }
    }

    pub fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let mut h = self.salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for &t in prefix {
            h = (h ^ t as u64).wrapping_mul(0x0100_0000_01B3).rotate_left(17);
        }
        let logits: Vec<f64> = (0..self.vocab)
            .map(|k| {
                let x = (h ^ (k as u64 + 1)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                (x >> 11) as f64 / (1u64 << 53) as f64 * self.spread
            })
            .collect();
        capgen_core::nn::log_softmax(&logits)
    }

    /// Sum of per-step log-probabilities of `START, tokens.., END` (END only
    /// if the caption is shorter than `max_len`).
    pub fn score(&self, tokens: &[usize], max_len: usize) -> f64 {
        use capgen_core::data::{END, START};
        let mut prefix = vec![START];
        let mut total = 0.0;
        for &t in tokens {
            total += self.log_probs(&prefix)[t];
            prefix.push(t);
        }
        if tokens.len() < max_len {
            total += self.log_probs(&prefix)[END];
        }
        total
    }
}

impl capgen_core::decoding::StepScorer for HashScorer {
    type State = Vec<usize>;

    fn initial(&self) -> capgen_core::Result<Vec<usize>> {
        Ok(Vec::new())
    }

    fn advance(&self, state: &Vec<usize>, token: usize) -> capgen_core::Result<(Vec<usize>, Vec<f64>)> {
        let mut next = state.clone();
        next.push(token);
        Ok((next.clone(), self.log_probs(&next)))
    }
}
