mod common;

use capgen_core::metrics::{bleu_upto, cider, cider_per_image, rouge_l, rouge_l_per_image, EvalCorpus, EvalEntry};
use common::{add_exact_reference, only, permute_images, permute_references, random_corpus};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn all_metrics(c: &EvalCorpus) -> Vec<f64> {
    let mut v = bleu_upto(c, 4).unwrap();
    v.push(rouge_l(c).unwrap());
    v.push(cider(c).unwrap());
    v
}

fn per_image_metrics(c: &EvalCorpus, j: usize) -> Vec<f64> {
    let mut v = bleu_upto(&only(c, j), 4).unwrap();
    v.push(rouge_l_per_image(c)[j]);
    v.push(cider_per_image(c).unwrap()[j]);
    v
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metrics_ignore_image_order(seed in any::<u64>(), perm in any::<u64>()) {
        let c = random_corpus(seed);
        for (a, b) in all_metrics(&c).iter().zip(all_metrics(&permute_images(&c, perm))) {
            prop_assert!((a - b).abs() < TOL, "{a} vs {b}");
        }
    }

    #[test]
    fn metrics_ignore_reference_order(seed in any::<u64>(), perm in any::<u64>()) {
        let c = random_corpus(seed);
        for (a, b) in all_metrics(&c).iter().zip(all_metrics(&permute_references(&c, perm))) {
            prop_assert!((a - b).abs() < TOL, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_reference_never_lowers_that_images_scores(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let c = random_corpus(seed);
        let j = pick.index(c.len());
        let before = per_image_metrics(&c, j);
        let after = per_image_metrics(&add_exact_reference(&c, j), j);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(*a >= b - TOL, "{b} -> {a}");
        }
    }
}

#[test]
fn bleu_is_non_increasing_in_n_on_pinned_corpora() {
    for seed in 0..100 {
        let b = bleu_upto(&random_corpus(seed), 4).unwrap();
        assert!(b.windows(2).all(|w| w[1] <= w[0] + TOL), "seed {seed}: {b:?}");
    }
}

#[test]
fn corpus_bleu_can_rise_with_n_when_short_hypotheses_lack_long_ngrams() {
    // image 1 contributes an unmatched unigram but no bigrams; image 2 is a
    // perfect 4-word match, so p1 = 4/5 while p2 = 3/3
    let c = EvalCorpus::new(vec![
        EvalEntry {
            image_id: "1".into(),
            hypothesis: words("x"),
            references: vec![words("y z w")],
        },
        EvalEntry {
            image_id: "2".into(),
            hypothesis: words("a b c d"),
            references: vec![words("a b c d")],
        },
    ])
    .unwrap();
    let b = bleu_upto(&c, 2).unwrap();
    let bp = (1.0f64 - 7.0 / 5.0).exp();
    assert!((b[0] - 0.8 * bp).abs() < 1e-12);
    assert!((b[1] - 0.8f64.sqrt() * bp).abs() < 1e-12);
    assert!(b[1] > b[0]);
}
