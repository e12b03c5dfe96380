//! Annotated text ingestion: the Begin/Inside/End/Outside tag scheme,
//! tokenization, CoNLL and offset-annotation readers, span↔tag conversion,
//! corpus statistics and vocabularies.

mod codec;
mod conll;
mod offsets;
mod scheme;
mod sentence;
mod stats;
pub mod tokenize;
mod vocab;

pub use codec::{decode_tags, encode_spans, is_well_formed, Decoded, TokenSpan};
pub use conll::{parse_conll, parse_conll_untagged, write_conll};
pub use offsets::{parse_annotations, parse_offset_annotations, parse_texts, write_annotations, OffsetCorpus};
pub use scheme::{Tag, TagId, TagScheme, CHEMDNER_CLASSES};
pub use sentence::{encode_tags, EntityMention, Sentence, DEFAULT_DOC_ID};
pub use stats::{corpus_stats, CorpusStats};
pub use tokenize::{tokenize, tokenize_with_boundaries, tokenize_words, TOKENIZER_VERSION};
pub use vocab::{build_vocab, Vocabulary, PAD, UNK};
