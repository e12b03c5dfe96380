//! Token-per-line CoNLL-style files.
//!
//! ```text
//! -DOCSTART- 23380346
//! The<TAB>O
//! PDMS<TAB>B-ABBREVIATION
//!
//! ```
//!
//! A blank line ends a sentence; `-DOCSTART- <id>` opens a document. Lines
//! are `token<TAB>tag`; tags must belong to the scheme.

use super::scheme::{TagId, TagScheme};
use super::sentence::{Sentence, DEFAULT_DOC_ID};
use crate::error::{Error, Result};

const DOCSTART: &str = "-DOCSTART-";

struct Builder {
    doc_id: String,
    next_index: usize,
    tokens: Vec<String>,
    tags: Vec<TagId>,
    out: Vec<Sentence>,
}

impl Builder {
    fn flush(&mut self) {
        if self.tokens.is_empty() {
            return;
        }
        let tokens = std::mem::take(&mut self.tokens);
        let tags = std::mem::take(&mut self.tags);
        self.out.push(Sentence::from_tokens(
            self.doc_id.clone(),
            self.next_index,
            tokens,
            tags,
        ));
        self.next_index += 1;
    }
}

fn parse(input: &str, scheme: &TagScheme, require_tags: bool) -> Result<Vec<Sentence>> {
    let mut b = Builder {
        doc_id: DEFAULT_DOC_ID.to_string(),
        next_index: 0,
        tokens: Vec::new(),
        tags: Vec::new(),
        out: Vec::new(),
    };
    for (lineno, raw) in input.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            b.flush();
            continue;
        }
        if let Some(rest) = line.strip_prefix(DOCSTART) {
            b.flush();
            let id = rest.trim();
            b.doc_id = if id.is_empty() {
                format!("doc{line_no}")
            } else {
                id.to_string()
            };
            b.next_index = 0;
            continue;
        }
        let mut cols = line.split('\t');
        let token = cols.next().unwrap_or_default();
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("invalid token {token:?}"),
            });
        }
        let tag = match cols.next() {
            Some(name) => scheme.parse_tag(name.trim()).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown tag {name:?}"),
            })?,
            None if require_tags => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "missing tag column".into(),
                })
            }
            None => 0,
        };
        b.tokens.push(token.to_string());
        b.tags.push(tag);
    }
    b.flush();
    Ok(b.out)
}

/// Parses a tagged CoNLL file. Unknown tags are reported with their line.
pub fn parse_conll(input: &str, scheme: &TagScheme) -> Result<Vec<Sentence>> {
    parse(input, scheme, true)
}

/// Like [`parse_conll`], but the tag column is optional (missing tags read
/// as `O`). Used for text that is about to be tagged.
pub fn parse_conll_untagged(input: &str, scheme: &TagScheme) -> Result<Vec<Sentence>> {
    parse(input, scheme, false)
}

/// Serializes sentences, emitting a `-DOCSTART-` line whenever the document
/// changes.
pub fn write_conll(sentences: &[Sentence], scheme: &TagScheme) -> String {
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for s in sentences {
        if current != Some(s.doc_id.as_str()) {
            if s.doc_id != DEFAULT_DOC_ID || current.is_some() {
                out.push_str(DOCSTART);
                out.push(' ');
                out.push_str(&s.doc_id);
                out.push_str("\n\n");
            }
            current = Some(s.doc_id.as_str());
        }
        for (tok, &tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&scheme.tag_name(tag));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
