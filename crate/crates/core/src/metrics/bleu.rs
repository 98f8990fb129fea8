use crate::error::{Error, Result};

use super::{ngram_counts, EvalCorpus};

/// Reference length closest to `hyp_len`, ties to the shorter reference.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(hyp_len), l))
        .unwrap_or(0)
}

/// Corpus BLEU-1 through BLEU-`n`.
pub fn bleu_upto(corpus: &EvalCorpus, n: usize) -> Result<Vec<f64>> {
    if !(1..=4).contains(&n) {
        return Err(Error::usage(format!("BLEU order must be 1..=4, got {n}")));
    }
    if corpus.is_empty() {
        return Err(Error::usage("BLEU of an empty corpus"));
    }
    let mut correct = vec![0usize; n];
    let mut guessed = vec![0usize; n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);

    for entry in corpus.entries() {
        let hyp = &entry.hypothesis;
        hyp_len += hyp.len();
        ref_len += closest_ref_len(hyp.len(), &entry.references);
        let hyp_counts = ngram_counts(hyp, n);
        let ref_counts: Vec<_> = entry.references.iter().map(|r| ngram_counts(r, n)).collect();
        for (gram, &count) in &hyp_counts {
            let max_ref = ref_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            correct[gram.len() - 1] += count.min(max_ref);
        }
        for (k, g) in guessed.iter_mut().enumerate() {
            *g += hyp.len().saturating_sub(k);
        }
    }

    if hyp_len == 0 {
        return Ok(vec![0.0; n]);
    }
    let brevity = (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp();
    let mut log_sum = 0.0;
    let mut scores = Vec::with_capacity(n);
    for k in 0..n {
        if correct[k] == 0 || guessed[k] == 0 {
            log_sum = f64::NEG_INFINITY;
        } else {
            log_sum += (correct[k] as f64 / guessed[k] as f64).ln();
        }
        scores.push(brevity * (log_sum / (k + 1) as f64).exp());
    }
    Ok(scores)
}

/// Corpus BLEU-`n`: geometric mean of clipped k-gram precisions
/// (`k = 1..=n`) times the brevity penalty.
pub fn bleu(corpus: &EvalCorpus, n: usize) -> Result<f64> {
    Ok(bleu_upto(corpus, n)?[n - 1])
}
