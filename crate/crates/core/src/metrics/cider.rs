use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{ngram_counts, EvalCorpus};

/// Width of the Gaussian length penalty.
pub const CIDER_SIGMA: f64 = 6.0;
const MAX_N: usize = 4;
const SCALE: f64 = 10.0;

type Counts<'a> = BTreeMap<&'a [String], usize>;

struct TfIdf<'a> {
    vec: [BTreeMap<&'a [String], f64>; MAX_N],
    norm: [f64; MAX_N],
    /// Bigram count, which is what the toolkit uses as the length.
    length: f64,
}

fn tf_idf<'a>(counts: &Counts<'a>, df: &BTreeMap<&[String], usize>, log_docs: f64) -> TfIdf<'a> {
    let mut out = TfIdf {
        vec: Default::default(),
        norm: [0.0; MAX_N],
        length: 0.0,
    };
    for (&gram, &tf) in counts {
        let k = gram.len() - 1;
        let doc_freq = df.get(gram).copied().unwrap_or(0).max(1) as f64;
        let w = tf as f64 * (log_docs - doc_freq.ln());
        out.vec[k].insert(gram, w);
        out.norm[k] += w * w;
        if k == 1 {
            out.length += tf as f64;
        }
    }
    for n in &mut out.norm {
        *n = n.sqrt();
    }
    out
}

fn similarity(hyp: &TfIdf, reference: &TfIdf) -> [f64; MAX_N] {
    let delta = hyp.length - reference.length;
    let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
    let mut val = [0.0; MAX_N];
    for (k, v) in val.iter_mut().enumerate() {
        for (gram, &h) in &hyp.vec[k] {
            if let Some(&r) = reference.vec[k].get(gram) {
                *v += h.min(r) * r;
            }
        }
        if hyp.norm[k] != 0.0 && reference.norm[k] != 0.0 {
            *v /= hyp.norm[k] * reference.norm[k];
        }
        *v *= penalty;
    }
    val
}

/// CIDEr-D score of every image, in corpus order.
pub fn cider_per_image(corpus: &EvalCorpus) -> Result<Vec<f64>> {
    if corpus.len() < 2 {
        return Err(Error::usage(
            "CIDEr-D needs at least two images for document frequencies",
        ));
    }
    let ref_counts: Vec<Vec<Counts>> = corpus
        .entries()
        .iter()
        .map(|e| e.references.iter().map(|r| ngram_counts(r, MAX_N)).collect())
        .collect();

    // Document frequency: number of images whose references contain the gram.
    let mut df: BTreeMap<&[String], usize> = BTreeMap::new();
    for refs in &ref_counts {
        let mut seen: Vec<&[String]> = refs.iter().flat_map(|c| c.keys().copied()).collect();
        seen.sort_unstable();
        seen.dedup();
        for gram in seen {
            *df.entry(gram).or_default() += 1;
        }
    }
    let log_docs = (corpus.len() as f64).ln();

    let scores = corpus
        .entries()
        .iter()
        .zip(&ref_counts)
        .map(|(entry, refs)| {
            let hyp = tf_idf(&ngram_counts(&entry.hypothesis, MAX_N), &df, log_docs);
            let mut total = [0.0; MAX_N];
            for r in refs {
                let sim = similarity(&hyp, &tf_idf(r, &df, log_docs));
                for (t, s) in total.iter_mut().zip(sim) {
                    *t += s;
                }
            }
            let mean_over_n = total.iter().sum::<f64>() / MAX_N as f64;
            SCALE * mean_over_n / refs.len() as f64
        })
        .collect();
    Ok(scores)
}

/// Corpus CIDEr-D: mean of [`cider_per_image`].
pub fn cider(corpus: &EvalCorpus) -> Result<f64> {
    let scores = cider_per_image(corpus)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EvalEntry;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn corpus(pairs: &[(&str, &[&str])]) -> EvalCorpus {
        EvalCorpus::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, (h, refs))| EvalEntry {
                    image_id: i.to_string(),
                    hypothesis: toks(h),
                    references: refs.iter().map(|r| toks(r)).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn disjoint_perfect_match_scores_ten() {
        let c = corpus(&[
            ("a dog runs on grass", &["a dog runs on grass"]),
            ("two men play chess here", &["two men play chess here"]),
        ]);
        assert!((cider(&c).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_hypothesis_scores_zero() {
        let c = corpus(&[("x y z w", &["a b c d"]), ("a b c d", &["e f g h"])]);
        assert_eq!(cider_per_image(&c).unwrap()[0], 0.0);
    }

    #[test]
    fn single_image_is_rejected() {
        let c = corpus(&[("a b", &["a b"])]);
        assert!(cider(&c).is_err());
    }

    #[test]
    fn length_penalty_uses_bigram_counts() {
        let c = corpus(&[("a b c", &["a b c d e"]), ("p q r", &["s t u"])]);
        let t = toks("a b c");
        let h = tf_idf(&ngram_counts(&t, MAX_N), &BTreeMap::new(), 1.0);
        assert_eq!(h.length, 2.0);
        assert!(cider(&c).unwrap() > 0.0);
    }
}
