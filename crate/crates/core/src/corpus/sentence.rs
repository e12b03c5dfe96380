use serde::{Deserialize, Serialize};

use super::codec::{decode_tags, encode_spans, TokenSpan};
use super::scheme::{TagId, TagScheme};
use super::tokenize::char_slice;
use crate::error::{Error, Result};

/// Document id given to sentences that precede any `-DOCSTART-` line.
pub const DEFAULT_DOC_ID: &str = "default";

/// One tokenized, tagged sentence.
///
/// `char_offsets` index into `text` (in chars). `index` is the position of
/// the sentence within its document; `section` is `"T"`/`"A"` for title and
/// abstract sentences read from offset annotations and empty otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub section: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub tags: Vec<TagId>,
    pub char_offsets: Vec<(usize, usize)>,
}

impl Sentence {
    /// Builds a sentence whose text is the tokens joined by single spaces.
    pub fn from_tokens(doc_id: impl Into<String>, index: usize, tokens: Vec<String>, tags: Vec<TagId>) -> Self {
        let mut offsets = Vec::with_capacity(tokens.len());
        let mut text = String::new();
        let mut pos = 0;
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let len = t.chars().count();
            offsets.push((pos, pos + len));
            text.push_str(t);
            pos += len;
        }
        Sentence {
            doc_id: doc_id.into(),
            index,
            section: String::new(),
            text,
            tokens,
            tags,
            char_offsets: offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Same tokens with a different tag sequence.
    pub fn with_tags(&self, tags: Vec<TagId>) -> Sentence {
        Sentence { tags, ..self.clone() }
    }

    pub fn spans(&self, scheme: &TagScheme) -> (Vec<TokenSpan>, usize) {
        let d = decode_tags(&self.tags, scheme);
        (d.spans, d.repairs)
    }

    /// Decoded mentions with char offsets, plus the decoder's repair count.
    pub fn mentions(&self, scheme: &TagScheme) -> (Vec<EntityMention>, usize) {
        let (spans, repairs) = self.spans(scheme);
        let mentions = spans
            .into_iter()
            .map(|s| {
                let start = self.char_offsets[s.start].0;
                let end = self.char_offsets[s.end - 1].1;
                EntityMention {
                    doc_id: self.doc_id.clone(),
                    section: self.section.clone(),
                    start_char: start,
                    end_char: end,
                    surface: char_slice(&self.text, start, end),
                    class: scheme.class_name(s.class).to_string(),
                }
            })
            .collect();
        (mentions, repairs)
    }

    /// Maps a char-offset mention onto this sentence's tokens.
    pub fn token_span(&self, m: &EntityMention, scheme: &TagScheme) -> Result<TokenSpan> {
        let integrity = |msg: &str| Error::Integrity {
            doc_id: m.doc_id.clone(),
            start: m.start_char,
            end: m.end_char,
            msg: msg.to_string(),
        };
        let class = scheme
            .class_index(&m.class)
            .ok_or_else(|| integrity(&format!("unknown entity class {:?}", m.class)))?;
        let first = self
            .char_offsets
            .iter()
            .position(|&(s, _)| s == m.start_char)
            .ok_or_else(|| integrity("mention start is not a token boundary"))?;
        let last = self
            .char_offsets
            .iter()
            .position(|&(_, e)| e == m.end_char)
            .ok_or_else(|| integrity("mention end is not a token boundary"))?;
        if last < first {
            return Err(integrity("mention end precedes its start"));
        }
        Ok(TokenSpan::new(first, last + 1, class))
    }
}

/// Tags for `sentence` carrying `mentions` (char offsets in the sentence's
/// text frame). Overlapping mentions are an error.
pub fn encode_tags(mentions: &[EntityMention], sentence: &Sentence, scheme: &TagScheme) -> Result<Vec<TagId>> {
    let spans = mentions
        .iter()
        .map(|m| sentence.token_span(m, scheme))
        .collect::<Result<Vec<_>>>()?;
    encode_spans(&spans, sentence.len(), scheme)
}

/// A chemical mention located by char offsets within one section of a
/// document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityMention {
    pub doc_id: String,
    pub section: String,
    pub start_char: usize,
    pub end_char: usize,
    pub surface: String,
    pub class: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_tokens_synthesizes_offsets() {
        let s = Sentence::from_tokens("d", 0, vec!["free".into(), "fatty".into(), "acid".into()], vec![0; 3]);
        assert_eq!(s.text, "free fatty acid");
        assert_eq!(s.char_offsets, vec![(0, 4), (5, 10), (11, 15)]);
    }

    #[test]
    fn mention_round_trip_through_tags() {
        let scheme = TagScheme::chemdner();
        let s = Sentence::from_tokens(
            "d",
            0,
            vec!["High".into(), "free".into(), "fatty".into(), "acid".into()],
            vec![0; 4],
        );
        let m = EntityMention {
            doc_id: "d".into(),
            section: String::new(),
            start_char: 5,
            end_char: 20,
            surface: "free fatty acid".into(),
            class: "FAMILY".into(),
        };
        let tags = encode_tags(std::slice::from_ref(&m), &s, &scheme).unwrap();
        let names: Vec<String> = tags.iter().map(|&t| scheme.tag_name(t)).collect();
        assert_eq!(names, ["O", "B-FAMILY", "I-FAMILY", "E-FAMILY"]);
        let (back, repairs) = s.with_tags(tags).mentions(&scheme);
        assert_eq!(repairs, 0);
        assert_eq!(back, vec![m]);
    }

    #[test]
    fn misaligned_mention_is_rejected() {
        let scheme = TagScheme::chemdner();
        let s = Sentence::from_tokens("d", 0, vec!["PDMS".into()], vec![0]);
        let m = EntityMention {
            doc_id: "d".into(),
            section: String::new(),
            start_char: 1,
            end_char: 4,
            surface: "DMS".into(),
            class: "ABBREVIATION".into(),
        };
        assert!(matches!(encode_tags(&[m], &s, &scheme), Err(Error::Integrity { .. })));
    }
}
