use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const START_TOKEN: &str = "<beg>";
pub const END_TOKEN: &str = "<end>";
pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Fixed indices of the special tokens.
pub const START: usize = 0;
pub const END: usize = 1;
pub const UNKNOWN: usize = 2;

const SPECIALS: [&str; 3] = [START_TOKEN, END_TOKEN, UNKNOWN_TOKEN];

/// Dense token ↔ index mapping. Indices 0..3 are the specials, then words by
/// descending training frequency, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    threshold: usize,
}

/// Keeps every token whose frequency over `captions` is at least `threshold`.
pub fn build_vocab<'a, I>(captions: I, threshold: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if threshold == 0 {
        return Err(Error::usage("vocabulary threshold must be at least 1"));
    }
    let mut counts: HashMap<&'a str, usize> = HashMap::new();
    for caption in captions {
        for token in caption {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::usage("cannot build a vocabulary from an empty corpus"));
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tok, n)| n >= threshold && !SPECIALS.contains(&tok))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = SPECIALS
        .iter()
        .copied()
        .chain(kept.into_iter().map(|(t, _)| t))
        .map(str::to_owned)
        .collect();
    Vocabulary::from_tokens(tokens, threshold)
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its index-ordered token list.
    pub fn from_tokens(tokens: Vec<String>, threshold: usize) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens[..3] != SPECIALS {
            return Err(Error::Integrity(format!("vocabulary must start with {SPECIALS:?}")));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Words other than the specials.
    pub fn words(&self) -> &[String] {
        &self.tokens[SPECIALS.len()..]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn is_special(index: usize) -> bool {
        index < SPECIALS.len()
    }

    /// `[start] + words (unknown for OOV) + [end]`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        out.push(START);
        out.extend(tokens.iter().map(|t| self.index_of(t.as_ref()).unwrap_or(UNKNOWN)));
        out.push(END);
        out
    }

    /// Maps indices back to tokens, dropping start and end markers.
    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .filter(|&&i| i != START && i != END)
            .map(|&i| self.token(i).unwrap_or(UNKNOWN_TOKEN).to_owned())
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for t in &self.tokens {
            text.push_str(t);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, threshold: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(str::to_owned).collect(), threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(captions: &[&str]) -> Vec<Vec<String>> {
        captions
            .iter()
            .map(|c| c.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    fn vocab(captions: &[Vec<String>], threshold: usize) -> Vocabulary {
        build_vocab(captions.iter().map(Vec::as_slice), threshold).unwrap()
    }

    #[test]
    fn threshold_keeps_frequent_tokens_only() {
        let c = corpus(&["a a a b", "a a b"]);
        let v = vocab(&c, 3);
        assert_eq!(v.words(), &["a".to_string()]);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn threshold_one_keeps_everything() {
        let c = corpus(&["the dog runs", "a cat sits", "the cat"]);
        let v = vocab(&c, 1);
        assert_eq!(v.words().len(), 6);
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let c = corpus(&["b c a", "c b", "c d"]);
        let v = vocab(&c, 1);
        assert_eq!(v.words(), &["c", "b", "a", "d"].map(String::from));
        assert_eq!(v.token(START), Some(START_TOKEN));
        assert_eq!(v.token(END), Some(END_TOKEN));
        assert_eq!(v.token(UNKNOWN), Some(UNKNOWN_TOKEN));
    }

    #[test]
    fn empty_corpus_and_zero_threshold_are_rejected() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(
            build_vocab(empty.iter().map(Vec::as_slice), 3),
            Err(Error::Usage(_))
        ));
        let c = corpus(&["a"]);
        assert!(matches!(
            build_vocab(c.iter().map(Vec::as_slice), 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn encoding_rules() {
        let c = corpus(&["a dog", "a dog"]);
        let v = vocab(&c, 1);
        let a = v.index_of("a").unwrap();
        let dog = v.index_of("dog").unwrap();
        assert_eq!(v.encode(&["a", "dog"]), vec![START, a, dog, END]);
        assert_eq!(v.encode(&["zyzzyva"]), vec![START, UNKNOWN, END]);
        assert_eq!(v.encode::<&str>(&[]), vec![START, END]);
        assert_eq!(v.decode(&v.encode(&["dog", "a"])), vec!["dog", "a"]);
    }

    #[test]
    fn save_load_round_trip() {
        let c = corpus(&["x y z", "x y", "x"]);
        let v = vocab(&c, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path, 1).unwrap(), v);
    }

    #[test]
    fn raising_threshold_never_grows_vocabulary() {
        let c = corpus(&["a a a a a b b b b c c c d d e", "a b c f", "g g a"]);
        let sizes: Vec<usize> = (1..=6).map(|t| vocab(&c, t).len()).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    }
}
