use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};

use super::{bleu_upto, cider, rouge_l, EvalCorpus};

/// Scores of one generated caption set. METEOR is not computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub vocab_usage_percent: f64,
}

impl MetricReport {
    pub const KEYS: [&'static str; 7] = [
        "bleu1",
        "bleu2",
        "bleu3",
        "bleu4",
        "rouge_l",
        "cider",
        "vocab_usage_percent",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.rouge_l,
            self.cider,
            self.vocab_usage_percent,
        ]
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Self::KEYS.iter().position(|k| *k == key).map(|i| self.values()[i])
    }

    fn from_values(v: [f64; 7]) -> Self {
        MetricReport {
            bleu1: v[0],
            bleu2: v[1],
            bleu3: v[2],
            bleu4: v[3],
            rouge_l: v[4],
            cider: v[5],
            vocab_usage_percent: v[6],
        }
    }
}

/// Percentage of the non-special vocabulary that occurs in `hypotheses`.
pub fn vocab_usage<S: AsRef<str>>(hypotheses: &[Vec<S>], vocab: &Vocabulary) -> f64 {
    let words = vocab.words();
    if words.is_empty() {
        return 0.0;
    }
    let used: BTreeSet<&str> = hypotheses.iter().flatten().map(AsRef::as_ref).collect();
    let hits = words.iter().filter(|w| used.contains(w.as_str())).count();
    100.0 * hits as f64 / words.len() as f64
}

pub fn evaluate(corpus: &EvalCorpus, vocab: &Vocabulary) -> Result<MetricReport> {
    let b = bleu_upto(corpus, 4)?;
    let hyps: Vec<&Vec<String>> = corpus.entries().iter().map(|e| &e.hypothesis).collect();
    let hyps: Vec<Vec<&str>> = hyps.iter().map(|h| h.iter().map(String::as_str).collect()).collect();
    Ok(MetricReport {
        bleu1: b[0],
        bleu2: b[1],
        bleu3: b[2],
        bleu4: b[3],
        rouge_l: rouge_l(corpus)?,
        cider: cider(corpus)?,
        vocab_usage_percent: vocab_usage(&hyps, vocab),
    })
}

/// Writes `metric<TAB>value` lines with six decimals.
pub fn write_report(path: impl AsRef<Path>, report: &MetricReport) -> Result<()> {
    let path = path.as_ref();
    let text: String = MetricReport::KEYS
        .iter()
        .zip(report.values())
        .map(|(k, v)| format!("{k}\t{v:.6}\n"))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = [None; 7];
    let mut offset = 0u64;
    for line in text.split_terminator('\n') {
        let parsed = line.split_once('\t').and_then(|(k, v)| {
            Some((
                MetricReport::KEYS.iter().position(|key| *key == k)?,
                v.trim().parse::<f64>().ok()?,
            ))
        });
        let Some((i, v)) = parsed else {
            return Err(Error::format(path, Some(offset), format!("bad metric line {line:?}")));
        };
        values[i] = Some(v);
        offset += line.len() as u64 + 1;
    }
    let mut out = [0.0; 7];
    for (i, v) in values.iter().enumerate() {
        out[i] = v.ok_or_else(|| Error::format(path, None, format!("missing metric {}", MetricReport::KEYS[i])))?;
    }
    Ok(MetricReport::from_values(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EvalEntry;

    fn vocab(n: usize) -> Vocabulary {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        crate::data::build_vocab(std::iter::once(words.as_slice()), 1).unwrap()
    }

    #[test]
    fn usage_percentages() {
        let v = vocab(100);
        let used: Vec<Vec<String>> = vec![
            (0..15).map(|i| format!("w{i}")).collect(),
            vec!["w3".into(), "<end>".into()],
        ];
        assert!((vocab_usage(&used, &v) - 15.0).abs() < 1e-12);
        assert_eq!(vocab_usage::<String>(&[], &v), 0.0);
        let all = vec![v.words().to_vec()];
        assert!((vocab_usage(&all, &v) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_corpus_and_file_round_trip() {
        let entries = ["a dog runs on the grass", "two men play chess in a park"]
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let t: Vec<String> = s.split(' ').map(str::to_owned).collect();
                EvalEntry {
                    image_id: i.to_string(),
                    hypothesis: t.clone(),
                    references: vec![t],
                }
            })
            .collect();
        let corpus = EvalCorpus::new(entries).unwrap();
        let r = evaluate(&corpus, &vocab(5)).unwrap();
        for v in [r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.rouge_l] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((r.cider - 10.0).abs() < 1e-9);
        assert_eq!(r, evaluate(&corpus, &vocab(5)).unwrap());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        write_report(&path, &r).unwrap();
        let back = read_report(&path).unwrap();
        for (a, b) in r.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-6);
        }
        fs::write(&path, "bleu1\tx\n").unwrap();
        assert!(matches!(read_report(&path), Err(Error::Format { .. })));
    }
}
