//! Corpus-level caption metrics following the MSCOCO caption toolkit:
//! BLEU-1..4, ROUGE-L, CIDEr-D, plus the share of the vocabulary that the
//! generated captions actually use.

mod bleu;
mod cider;
mod corpus;
mod report;
mod rouge;

pub use bleu::{bleu, bleu_upto};
pub use cider::{cider, cider_per_image, CIDER_SIGMA};
pub use corpus::{EvalCorpus, EvalEntry};
pub use report::{evaluate, read_report, vocab_usage, write_report, MetricReport};
pub use rouge::{lcs_len, rouge_l, rouge_l_per_image, ROUGE_BETA};

use std::collections::BTreeMap;

/// Counts of every k-gram, `1 ≤ k ≤ n`, keyed by token slice.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    for k in 1..=n {
        for gram in tokens.windows(k) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}
