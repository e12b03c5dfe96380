//! Bundled toy corpus: documents that introduce a chemical by its long
//! form with the abbreviation in parentheses, then keep reusing the
//! abbreviation. Regenerate with `data/generate_toy.py`.

use crate::corpus::{parse_conll, Sentence, TagScheme};

pub const TOY_CONLL: &str = include_str!("../data/toy.conll");
pub const TOY_HELDOUT_CONLL: &str = include_str!("../data/toy_heldout.conll");

/// The 60-sentence training split.
pub fn toy_corpus() -> Vec<Sentence> {
    parse_conll(TOY_CONLL, &TagScheme::chemdner()).expect("bundled toy corpus parses")
}

/// Held-out documents following the same pattern.
pub fn toy_heldout() -> Vec<Sentence> {
    parse_conll(TOY_HELDOUT_CONLL, &TagScheme::chemdner()).expect("bundled held-out corpus parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_stats;

    #[test]
    fn toy_corpus_shape() {
        let scheme = TagScheme::chemdner();
        let train = toy_corpus();
        assert_eq!(train.len(), 60);
        let stats = corpus_stats(&train, &scheme);
        assert_eq!(stats.documents, 15);
        assert_eq!(stats.repairs, 0);
        assert!(stats.per_class["ABBREVIATION"] >= 45);
        let held = toy_heldout();
        assert_eq!(held.len(), 24);
        assert_eq!(corpus_stats(&held, &scheme).repairs, 0);
    }
}
