//! End-to-end training of the tagger, its configuration, optimizer and
//! checkpoint format.

mod checkpoint;
mod config;
mod model;
mod optim;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{AttentionFusion, EmbeddingSource, OptimizerKind, TrainConfig, CONFIG_KEYS};
pub use model::{Mode, Model};
pub use optim::{Optimizer, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use trainer::{train, EpochLog, TrainOptions, TrainOutcome};
