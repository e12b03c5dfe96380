//! CHEMDNER-style offset annotations.
//!
//! Text file: `doc_id<TAB>title<TAB>abstract` per line.
//! Annotation file: `doc_id<TAB>section<TAB>start<TAB>end<TAB>surface<TAB>class`
//! with `section` either `T` or `A` and char offsets relative to that
//! section's text.
//!
//! Each non-empty section becomes one sentence. Tokens are cut at every
//! mention edge so each mention maps onto whole tokens.

use std::collections::{BTreeMap, HashMap};

use super::scheme::TagScheme;
use super::sentence::{encode_tags, EntityMention, Sentence};
use super::tokenize::{char_slice, tokenize, tokenize_with_boundaries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetCorpus {
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<EntityMention>,
    /// Mentions whose edges did not fall on plain tokenizer boundaries.
    pub retokenized: usize,
}

fn parse_usize(field: &str, line: usize, what: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} {field:?}"),
    })
}

/// Reads the annotation TSV into mentions grouped by document.
pub fn parse_annotations(input: &str, scheme: &TagScheme) -> Result<Vec<EntityMention>> {
    let mut out = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 6 tab-separated columns, found {}", cols.len()),
            });
        }
        let section = cols[1].trim();
        if section != "T" && section != "A" {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("section must be T or A, found {section:?}"),
            });
        }
        let start = parse_usize(cols[2], line_no, "start offset")?;
        let end = parse_usize(cols[3], line_no, "end offset")?;
        if start >= end {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("empty or inverted span [{start}, {end})"),
            });
        }
        let class = cols[5].trim();
        if scheme.class_index(class).is_none() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unknown entity class {class:?}"),
            });
        }
        out.push(EntityMention {
            doc_id: cols[0].trim().to_string(),
            section: section.to_string(),
            start_char: start,
            end_char: end,
            surface: cols[4].to_string(),
            class: class.to_string(),
        });
    }
    Ok(out)
}

/// Reads the text TSV as `(doc_id, title, abstract)` in file order.
pub fn parse_texts(input: &str) -> Result<Vec<(String, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected doc_id, title and abstract columns, found {}", cols.len()),
            });
        }
        out.push((cols[0].trim().to_string(), cols[1].to_string(), cols[2].to_string()));
    }
    Ok(out)
}

/// Joins texts and annotations into tagged sentences.
pub fn parse_offset_annotations(text_input: &str, ann_input: &str, scheme: &TagScheme) -> Result<OffsetCorpus> {
    let docs = parse_texts(text_input)?;
    let mentions = parse_annotations(ann_input, scheme)?;

    let known: HashMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, (id, _, _))| (id.as_str(), i))
        .collect();
    let mut by_section: BTreeMap<(usize, &str), Vec<&EntityMention>> = BTreeMap::new();
    for m in &mentions {
        let doc = *known.get(m.doc_id.as_str()).ok_or_else(|| Error::Integrity {
            doc_id: m.doc_id.clone(),
            start: m.start_char,
            end: m.end_char,
            msg: "annotation refers to a document missing from the text file".into(),
        })?;
        by_section.entry((doc, m.section.as_str())).or_default().push(m);
    }

    let mut sentences = Vec::new();
    let mut retokenized = 0;
    for (doc_idx, (doc_id, title, abstract_text)) in docs.iter().enumerate() {
        let mut index = 0;
        for (section, text) in [("T", title), ("A", abstract_text)] {
            let section_mentions = by_section
                .get(&(doc_idx, section))
                .map(Vec::as_slice)
                .unwrap_or_default();
            let text_len = text.chars().count();
            for m in section_mentions {
                if m.end_char > text_len || char_slice(text, m.start_char, m.end_char) != m.surface {
                    return Err(Error::Integrity {
                        doc_id: m.doc_id.clone(),
                        start: m.start_char,
                        end: m.end_char,
                        msg: format!(
                            "surface {:?} does not match text slice {:?}",
                            m.surface,
                            char_slice(text, m.start_char, m.end_char.min(text_len))
                        ),
                    });
                }
            }
            let plain = tokenize(text);
            for m in section_mentions {
                let aligned =
                    plain.iter().any(|&(s, _)| s == m.start_char) && plain.iter().any(|&(_, e)| e == m.end_char);
                if !aligned {
                    retokenized += 1;
                }
            }
            let boundaries: Vec<usize> = section_mentions
                .iter()
                .flat_map(|m| [m.start_char, m.end_char])
                .collect();
            let offsets = tokenize_with_boundaries(text, &boundaries);
            if offsets.is_empty() {
                continue;
            }
            let tokens = offsets.iter().map(|&(s, e)| char_slice(text, s, e)).collect();
            let mut sentence = Sentence {
                doc_id: doc_id.clone(),
                index,
                section: section.to_string(),
                text: text.clone(),
                tokens,
                tags: vec![0; offsets.len()],
                char_offsets: offsets,
            };
            let owned: Vec<EntityMention> = section_mentions.iter().map(|m| (*m).clone()).collect();
            sentence.tags = encode_tags(&owned, &sentence, scheme)?;
            sentences.push(sentence);
            index += 1;
        }
    }
    Ok(OffsetCorpus {
        sentences,
        mentions,
        retokenized,
    })
}

/// Writes mentions back out in the annotation TSV layout.
pub fn write_annotations(mentions: &[EntityMention]) -> String {
    let mut out = String::new();
    for m in mentions {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            m.doc_id, m.section, m.start_char, m.end_char, m.surface, m.class
        ));
    }
    out
}
