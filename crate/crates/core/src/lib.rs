//! Chemical named entity recognition with a from-scratch
//! embeddings → BiLSTM → multi-head attention → CRF pipeline.
//!
//! Every layer carries a hand-written backward pass; the test suite checks
//! each one against central differences and the CRF against exhaustive
//! enumeration.

pub mod attention;
pub mod chaincrf;
pub mod corpus;
pub mod data;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod numkernel;
pub mod recurrent;
pub mod training;

pub use error::{Error, Result};
