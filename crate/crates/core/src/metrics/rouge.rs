use crate::error::{Error, Result};

use super::EvalCorpus;

/// Recall weight of the F-measure, as in the MSCOCO toolkit.
pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_measure(hyp: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Per image: the best LCS F-measure over its references.
pub fn rouge_l_per_image(corpus: &EvalCorpus) -> Vec<f64> {
    corpus
        .entries()
        .iter()
        .map(|e| {
            e.references
                .iter()
                .map(|r| f_measure(&e.hypothesis, r))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Mean of [`rouge_l_per_image`].
pub fn rouge_l(corpus: &EvalCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::usage("ROUGE-L of an empty corpus"));
    }
    let scores = rouge_l_per_image(corpus);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EvalEntry;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn single(hyp: &str, refs: &[&str]) -> EvalCorpus {
        EvalCorpus::new(vec![EvalEntry {
            image_id: "0".into(),
            hypothesis: toks(hyp),
            references: refs.iter().map(|r| toks(r)).collect(),
        }])
        .unwrap()
    }

    #[test]
    fn identical_is_one() {
        assert!((rouge_l(&single("a b c", &["a b c"])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_case() {
        // LCS 3, P = 3/4, R = 1
        let expected = (1.0 + 1.44) * 0.75 * 1.0 / (1.0 + 1.44 * 0.75);
        let got = rouge_l(&single("a b c d", &["a c d"])).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn disjoint_and_empty_hypotheses_score_zero() {
        assert_eq!(rouge_l(&single("x y", &["a b"])).unwrap(), 0.0);
        assert_eq!(rouge_l(&single("", &["a b"])).unwrap(), 0.0);
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&toks("a b c d"), &toks("a c d")), 3);
        assert_eq!(lcs_len(&toks("a b c"), &toks("c b a")), 1);
        assert_eq!(lcs_len(&[], &toks("a")), 0);
    }
}
