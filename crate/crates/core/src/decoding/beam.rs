use std::cmp::Ordering;

use crate::captioner::{CaptionModel, DecodeState};
use crate::data::{END, START};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, Real};

pub const DEFAULT_BEAM_WIDTH: usize = 3;
/// Cap on content words; the end token does not count.
pub const DEFAULT_MAX_LEN: usize = 20;

/// Source of next-token log-probabilities for incremental decoding.
pub trait StepScorer {
    type State: Clone;

    fn initial(&self) -> Result<Self::State>;

    /// Feeds `token` and returns the next state with log-probabilities over
    /// the whole vocabulary.
    fn advance(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)>;
}

/// A caption model bound to one image.
pub struct ImageScorer<'a, T> {
    model: &'a CaptionModel<T>,
    image: &'a [T],
}

impl<'a, T: Real> ImageScorer<'a, T> {
    pub fn new(model: &'a CaptionModel<T>, image: &'a [T]) -> Self {
        ImageScorer { model, image }
    }
}

impl<T: Real> StepScorer for ImageScorer<'_, T> {
    type State = DecodeState<T>;

    fn initial(&self) -> Result<Self::State> {
        self.model.begin(self.image)
    }

    fn advance(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)> {
        let (next, logits) = self.model.step(state, token)?;
        Ok((next, log_softmax(&logits).into_iter().map(Real::as_f64).collect()))
    }
}

/// Best hypothesis: content tokens only (no start/end) and its cumulative
/// log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamResult {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
}

struct Active<S> {
    tokens: Vec<usize>,
    log_prob: f64,
    state: S,
}

fn check_args(width: usize, max_len: usize) -> Result<()> {
    if width == 0 {
        return Err(Error::usage("beam width must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::usage("maximum caption length must be at least 1"));
    }
    Ok(())
}

/// Plain beam search on raw cumulative log-probability.
///
/// Each step expands every live hypothesis with every token except the start
/// token and keeps the `width` best candidates overall. Candidates ending in
/// the end token, or reaching `max_len` words, leave the beam as finished.
/// Search stops once no live hypothesis can beat the best finished one.
pub fn beam_search<S: StepScorer>(scorer: &S, width: usize, max_len: usize) -> Result<BeamResult> {
    check_args(width, max_len)?;
    let mut active = vec![Active {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: scorer.initial()?,
    }];
    let mut best: Option<BeamResult> = None;

    while !active.is_empty() {
        let mut expanded = Vec::with_capacity(active.len());
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (h, hyp) in active.iter().enumerate() {
            let last = hyp.tokens.last().copied().unwrap_or(START);
            let (state, log_probs) = scorer.advance(&hyp.state, last)?;
            for (tok, lp) in log_probs.iter().enumerate() {
                if tok != START {
                    candidates.push((hyp.log_prob + lp, h, tok));
                }
            }
            expanded.push(state);
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(width);

        let mut next = Vec::with_capacity(candidates.len());
        for (log_prob, h, tok) in candidates {
            let finished = if tok == END {
                Some(active[h].tokens.clone())
            } else if active[h].tokens.len() + 1 == max_len {
                let mut t = active[h].tokens.clone();
                t.push(tok);
                Some(t)
            } else {
                None
            };
            match finished {
                Some(tokens) => {
                    if best.as_ref().is_none_or(|b| log_prob > b.log_prob) {
                        best = Some(BeamResult { tokens, log_prob });
                    }
                }
                None => {
                    let mut tokens = active[h].tokens.clone();
                    tokens.push(tok);
                    next.push(Active {
                        tokens,
                        log_prob,
                        state: expanded[h].clone(),
                    });
                }
            }
        }
        active = next;
        if let Some(b) = &best {
            // log-probabilities only fall as hypotheses grow
            let live = active.iter().map(|a| a.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if b.log_prob.partial_cmp(&live) != Some(Ordering::Less) {
                break;
            }
        }
    }
    Ok(best.unwrap_or(BeamResult {
        tokens: Vec::new(),
        log_prob: f64::NEG_INFINITY,
    }))
}

/// Repeatedly takes the most likely non-start token.
pub fn greedy_decode<S: StepScorer>(scorer: &S, max_len: usize) -> Result<BeamResult> {
    check_args(1, max_len)?;
    let mut state = scorer.initial()?;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    let mut last = START;
    while tokens.len() < max_len {
        let (next, log_probs) = scorer.advance(&state, last)?;
        let (tok, lp) = log_probs.iter().enumerate().filter(|&(t, _)| t != START).fold(
            (usize::MAX, f64::NEG_INFINITY),
            |acc, (t, &lp)| {
                if lp > acc.1 || acc.0 == usize::MAX {
                    (t, lp)
                } else {
                    acc
                }
            },
        );
        log_prob += lp;
        if tok == END {
            break;
        }
        tokens.push(tok);
        state = next;
        last = tok;
    }
    Ok(BeamResult { tokens, log_prob })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Log-probabilities are a fixed pseudo-random function of the prefix.
    struct Table {
        vocab: usize,
        salt: u64,
    }

    impl Table {
        fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            let mut h = self.salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            for &t in prefix {
                h = (h ^ t as u64).wrapping_mul(0x0100_0000_01B3).rotate_left(17);
            }
            let logits: Vec<f64> = (0..self.vocab)
                .map(|k| {
                    let x = (h ^ (k as u64 + 1)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                    (x >> 11) as f64 / (1u64 << 53) as f64 * 4.0
                })
                .collect();
            let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
            logits.iter().map(|l| l - lse).collect()
        }
    }

    impl StepScorer for Table {
        type State = Vec<usize>;

        fn initial(&self) -> Result<Vec<usize>> {
            Ok(Vec::new())
        }

        fn advance(&self, state: &Vec<usize>, token: usize) -> Result<(Vec<usize>, Vec<f64>)> {
            let mut next = state.clone();
            next.push(token);
            let lp = self.log_probs(&next);
            Ok((next, lp))
        }
    }

    /// Every caption of at most `max_len` words, scored directly.
    fn exhaustive(table: &Table, max_len: usize) -> BeamResult {
        let mut best = BeamResult {
            tokens: vec![],
            log_prob: f64::NEG_INFINITY,
        };
        let mut stack = vec![(vec![START], 0.0)];
        while let Some((prefix, lp)) = stack.pop() {
            let probs = table.log_probs(&prefix);
            let words = prefix.len() - 1;
            for (tok, &p) in probs.iter().enumerate() {
                if tok == START {
                    continue;
                }
                let score = lp + p;
                let done = if tok == END {
                    Some(prefix[1..].to_vec())
                } else if words + 1 == max_len {
                    let mut t = prefix[1..].to_vec();
                    t.push(tok);
                    Some(t)
                } else {
                    None
                };
                match done {
                    Some(tokens) => {
                        if score > best.log_prob {
                            best = BeamResult {
                                tokens,
                                log_prob: score,
                            };
                        }
                    }
                    None => {
                        let mut p = prefix.clone();
                        p.push(tok);
                        stack.push((p, score));
                    }
                }
            }
        }
        best
    }

    fn rescore(table: &Table, tokens: &[usize], max_len: usize) -> f64 {
        let mut prefix = vec![START];
        let mut lp = 0.0;
        for &t in tokens {
            lp += table.log_probs(&prefix)[t];
            prefix.push(t);
        }
        if tokens.len() < max_len {
            lp += table.log_probs(&prefix)[END];
        }
        lp
    }

    #[test]
    fn full_width_beam_is_exhaustive() {
        for salt in 0..20 {
            let table = Table { vocab: 6, salt };
            let beam = beam_search(&table, 6usize.pow(4), 4).unwrap();
            let oracle = exhaustive(&table, 4);
            assert_eq!(beam.tokens, oracle.tokens, "salt {salt}");
            assert!((beam.log_prob - oracle.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn reported_score_is_the_caption_log_prob() {
        for salt in 0..20 {
            let table = Table { vocab: 6, salt };
            for width in [1, 2, 3, 5] {
                let r = beam_search(&table, width, 4).unwrap();
                assert!(r.tokens.len() <= 4 && !r.tokens.contains(&START) && !r.tokens.contains(&END));
                assert!((rescore(&table, &r.tokens, 4) - r.log_prob).abs() < 1e-9);
                assert!(r.log_prob <= exhaustive(&table, 4).log_prob + 1e-12);
            }
        }
    }

    #[test]
    fn width_one_matches_greedy() {
        for salt in 0..20 {
            let table = Table { vocab: 7, salt };
            let beam = beam_search(&table, 1, 6).unwrap();
            let greedy = greedy_decode(&table, 6).unwrap();
            assert_eq!(beam.tokens, greedy.tokens, "salt {salt}");
            assert!((beam.log_prob - greedy.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_width_or_length_is_rejected() {
        let table = Table { vocab: 6, salt: 0 };
        assert!(beam_search(&table, 0, 4).is_err());
        assert!(beam_search(&table, 3, 0).is_err());
        assert!(greedy_decode(&table, 0).is_err());
    }
}
