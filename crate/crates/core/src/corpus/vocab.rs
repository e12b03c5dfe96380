use std::collections::HashMap;

use super::sentence::Sentence;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id map with reserved ids `0 = PAD` and `1 = UNK`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Vocabulary over `tokens` in the given order, after the reserved ids.
    /// Duplicates and reserved names are skipped.
    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Self {
        let mut v = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(PAD_TOKEN.to_string(), PAD);
        v.index.insert(UNK_TOKEN.to_string(), UNK);
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// All entries in id order, reserved ones included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Tokens seen at least `min_count` times, ordered by descending frequency
/// then lexicographically, so the ids do not depend on corpus order.
pub fn build_vocab(sentences: &[Sentence], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Rng;

    fn corpus(words: &[&str]) -> Vec<Sentence> {
        vec![Sentence::from_tokens(
            "d",
            0,
            words.iter().map(|w| w.to_string()).collect(),
            vec![0; words.len()],
        )]
    }

    #[test]
    fn min_count_one() {
        let v = build_vocab(&corpus(&["a", "a", "b"]), 1).unwrap();
        assert_eq!(v.tokens(), [PAD_TOKEN, UNK_TOKEN, "a", "b"]);
    }

    #[test]
    fn min_count_two() {
        let v = build_vocab(&corpus(&["a", "a", "b"]), 2).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), UNK);
        assert!(build_vocab(&[], 0).is_err());
    }

    #[test]
    fn order_independent_of_corpus_order() {
        let words: Vec<String> = (0..200).map(|i| format!("t{}", i % 17 + i % 5)).collect();
        let mut rng = Rng::new(8);
        let reference = build_vocab(&corpus(&words.iter().map(String::as_str).collect::<Vec<_>>()), 1).unwrap();
        for _ in 0..5 {
            let mut shuffled = words.clone();
            rng.shuffle(&mut shuffled);
            let sents: Vec<Sentence> = shuffled
                .chunks(7)
                .map(|c| Sentence::from_tokens("d", 0, c.to_vec(), vec![0; c.len()]))
                .collect();
            assert_eq!(build_vocab(&sents, 1).unwrap(), reference);
        }
    }
}
