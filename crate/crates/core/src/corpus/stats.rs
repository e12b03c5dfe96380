use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::scheme::TagScheme;
use super::sentence::Sentence;

/// Counts over one corpus split.
///
/// Serialized field names: `documents`, `documents_with_mentions`,
/// `sentences`, `tokens`, `mentions`, `repairs`, `per_class` (every class
/// of the scheme, zeros included).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub documents_with_mentions: usize,
    pub sentences: usize,
    pub tokens: usize,
    pub mentions: usize,
    pub repairs: usize,
    pub per_class: BTreeMap<String, usize>,
}

pub fn corpus_stats(sentences: &[Sentence], scheme: &TagScheme) -> CorpusStats {
    let mut per_class: BTreeMap<String, usize> = scheme.classes().iter().map(|c| (c.clone(), 0)).collect();
    let mut docs = BTreeSet::new();
    let mut docs_with = BTreeSet::new();
    let mut stats = CorpusStats {
        documents: 0,
        documents_with_mentions: 0,
        sentences: sentences.len(),
        tokens: 0,
        mentions: 0,
        repairs: 0,
        per_class: BTreeMap::new(),
    };
    for s in sentences {
        docs.insert(s.doc_id.as_str());
        stats.tokens += s.len();
        let (spans, repairs) = s.spans(scheme);
        stats.repairs += repairs;
        stats.mentions += spans.len();
        if !spans.is_empty() {
            docs_with.insert(s.doc_id.as_str());
        }
        for sp in spans {
            *per_class.get_mut(scheme.class_name(sp.class)).expect("scheme class") += 1;
        }
    }
    stats.documents = docs.len();
    stats.documents_with_mentions = docs_with.len();
    stats.per_class = per_class;
    stats
}

impl CorpusStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
