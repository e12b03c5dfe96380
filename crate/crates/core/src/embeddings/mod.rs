//! Per-token input vectors: summed token/segment/position tables, an
//! optional small encoder stack on top, or vectors loaded from a
//! precomputed file.

mod encoder;
mod sleb;
mod tables;

pub use encoder::{gelu, layer_norm, EncoderBlock, EncoderCache, EncoderStackParams, LayerNorm, LN_EPS};
pub use sleb::{PrecomputedEmbeddings, SLEB_MAGIC, SLEB_VERSION};
pub use tables::{compose_embeddings, EmbeddingTables};
