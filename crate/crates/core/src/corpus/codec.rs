//! Conversion between token spans and per-token tags.
//!
//! Decoding is total. Malformed input is repaired with one fixed rule:
//!
//! * `I-c` or `E-c` that does not continue an open run of class `c` closes
//!   whatever run is open and starts a new run at that token, as if it were
//!   `B-c` (an `E-c` therefore yields a one-token mention). One repair.
//! * A run that has seen `I-` but ends without `E-` (on `O`, a new `B-`, a
//!   violation as above, or end of sentence) is truncated at that point and
//!   still emitted as a mention. One repair, unless the same token already
//!   counted a repair.
//!
//! A solitary `B-c` is a complete single-token mention and needs no repair.

use super::scheme::{Tag, TagId, TagScheme};
use crate::error::{Error, Result};

/// Half-open token range `[start, end)` with an entity class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub class: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize, class: usize) -> Self {
        TokenSpan { start, end, class }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decoded {
    pub spans: Vec<TokenSpan>,
    pub repairs: usize,
}

/// Tags for a sentence of `len` tokens carrying `spans`.
pub fn encode_spans(spans: &[TokenSpan], len: usize, scheme: &TagScheme) -> Result<Vec<TagId>> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for s in &sorted {
        if s.is_empty() || s.end > len {
            return Err(Error::Index {
                what: "span end",
                index: s.end,
                len,
            });
        }
        if s.class >= scheme.num_classes() {
            return Err(Error::Index {
                what: "entity class",
                index: s.class,
                len: scheme.num_classes(),
            });
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(Error::Overlap {
                first_start: pair[0].start,
                first_end: pair[0].end,
                second_start: pair[1].start,
                second_end: pair[1].end,
            });
        }
    }
    let mut tags = vec![scheme.id(Tag::Outside); len];
    for s in &sorted {
        tags[s.start] = scheme.id(Tag::Begin(s.class));
        if s.len() >= 2 {
            for t in &mut tags[s.start + 1..s.end - 1] {
                *t = scheme.id(Tag::Inside(s.class));
            }
            tags[s.end - 1] = scheme.id(Tag::End(s.class));
        }
    }
    Ok(tags)
}

struct OpenRun {
    start: usize,
    class: usize,
    saw_inside: bool,
}

/// Mentions recovered from a tag sequence, with the number of repairs made.
/// Ids outside the scheme are treated as `O` and counted as a repair.
pub fn decode_tags(tags: &[TagId], scheme: &TagScheme) -> Decoded {
    let mut out = Decoded::default();
    let mut open: Option<OpenRun> = None;

    // Closes the open run ending before `end`. Returns true if the run was
    // truncated (had I- without a closing E-).
    fn close(open: &mut Option<OpenRun>, end: usize, spans: &mut Vec<TokenSpan>) -> bool {
        match open.take() {
            Some(run) => {
                spans.push(TokenSpan::new(run.start, end, run.class));
                run.saw_inside
            }
            None => false,
        }
    }

    for (i, &id) in tags.iter().enumerate() {
        let tag = match scheme.tag(id) {
            Some(t) => t,
            None => {
                out.repairs += 1;
                close(&mut open, i, &mut out.spans);
                continue;
            }
        };
        match tag {
            Tag::Outside => {
                if close(&mut open, i, &mut out.spans) {
                    out.repairs += 1;
                }
            }
            Tag::Begin(c) => {
                if close(&mut open, i, &mut out.spans) {
                    out.repairs += 1;
                }
                open = Some(OpenRun {
                    start: i,
                    class: c,
                    saw_inside: false,
                });
            }
            Tag::Inside(c) | Tag::End(c) => {
                let continues = matches!(&open, Some(run) if run.class == c);
                if continues {
                    if let Tag::End(_) = tag {
                        let run = open.take().expect("checked above");
                        out.spans.push(TokenSpan::new(run.start, i + 1, c));
                    } else if let Some(run) = open.as_mut() {
                        run.saw_inside = true;
                    }
                } else {
                    close(&mut open, i, &mut out.spans);
                    out.repairs += 1;
                    if let Tag::End(_) = tag {
                        out.spans.push(TokenSpan::new(i, i + 1, c));
                    } else {
                        open = Some(OpenRun {
                            start: i,
                            class: c,
                            saw_inside: false,
                        });
                    }
                }
            }
        }
    }
    if close(&mut open, tags.len(), &mut out.spans) {
        out.repairs += 1;
    }
    out
}

/// True when `tags` decodes without any repair.
pub fn is_well_formed(tags: &[TagId], scheme: &TagScheme) -> bool {
    decode_tags(tags, scheme).repairs == 0
}
