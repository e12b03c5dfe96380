//! Training configuration and its plain-text `key=value` form.
//!
//! ```text
//! # comments and blank lines are ignored
//! lr=0.001
//! attention_fusion=residual
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numkernel::ClipMode;

/// How the attention output joins the BiLSTM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionFusion {
    /// Attention output alone.
    Replace,
    /// BiLSTM output plus attention output.
    Residual,
    /// No attention layer (plain BiLSTM-CRF).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    Trained,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub const NAMES: &'static [&'static str] = &[$($name),*];

            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($ty::$variant),)*
                    other => Err(Error::Config(format!(
                        "unknown {} {:?} (expected one of {})",
                        stringify!($ty), other, $ty::NAMES.join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

keyword_enum!(AttentionFusion { Replace => "replace", Residual => "residual", None => "none" });
keyword_enum!(EmbeddingSource { Trained => "trained", Precomputed => "precomputed" });
keyword_enum!(OptimizerKind { Adam => "adam", Sgd => "sgd" });

fn clip_mode_from_str(s: &str) -> Result<ClipMode> {
    match s.trim() {
        "global" => Ok(ClipMode::GlobalNorm),
        "elementwise" => Ok(ClipMode::Elementwise),
        other => Err(Error::Config(format!(
            "unknown clip_mode {other:?} (expected global or elementwise)"
        ))),
    }
}

fn clip_mode_name(m: ClipMode) -> &'static str {
    match m {
        ClipMode::GlobalNorm => "global",
        ClipMode::Elementwise => "elementwise",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub embedding_dim: usize,
    pub enc_hidden_dim: usize,
    pub lstm_dim: usize,
    pub key_dim: usize,
    pub val_dim: usize,
    pub num_heads: usize,
    pub weight_decay: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping; 0 disables.
    pub patience: usize,
    pub attention_fusion: AttentionFusion,
    pub crf_constraints: bool,
    pub embedding_source: EmbeddingSource,
    /// Keep embedding tables and encoder fixed during training.
    pub freeze_embeddings: bool,
    pub encoder_blocks: usize,
    /// Feed-forward width inside encoder blocks; 0 means `4 · embedding_dim`.
    pub ff_dim: usize,
    pub max_len: usize,
    pub forget_bias: f64,
    pub optimizer: OptimizerKind,
    pub clip_mode: ClipMode,
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            dropout: 0.5,
            embedding_dim: 768,
            enc_hidden_dim: 256,
            lstm_dim: 128,
            key_dim: 64,
            val_dim: 64,
            num_heads: 3,
            weight_decay: 0.01,
            clip: 5.0,
            epochs: 30,
            batch_size: 8,
            seed: 42,
            patience: 5,
            attention_fusion: AttentionFusion::Residual,
            crf_constraints: false,
            embedding_source: EmbeddingSource::Trained,
            freeze_embeddings: false,
            encoder_blocks: 2,
            ff_dim: 0,
            max_len: 512,
            forget_bias: 1.0,
            optimizer: OptimizerKind::Adam,
            clip_mode: ClipMode::GlobalNorm,
            min_count: 1,
        }
    }
}

/// Every configuration key in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "lr",
    "dropout",
    "embedding_dim",
    "enc_hidden_dim",
    "lstm_dim",
    "key_dim",
    "val_dim",
    "num_heads",
    "weight_decay",
    "clip",
    "epochs",
    "batch_size",
    "seed",
    "patience",
    "attention_fusion",
    "crf_constraints",
    "embedding_source",
    "freeze_embeddings",
    "encoder_blocks",
    "ff_dim",
    "max_len",
    "forget_bias",
    "optimizer",
    "clip_mode",
    "min_count",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    /// Sets one field by name. Hyphens in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "lr" => self.lr = parse(k, value)?,
            "dropout" => self.dropout = parse(k, value)?,
            "embedding_dim" => self.embedding_dim = parse(k, value)?,
            "enc_hidden_dim" => self.enc_hidden_dim = parse(k, value)?,
            "lstm_dim" => self.lstm_dim = parse(k, value)?,
            "key_dim" => self.key_dim = parse(k, value)?,
            "val_dim" => self.val_dim = parse(k, value)?,
            "num_heads" => self.num_heads = parse(k, value)?,
            "weight_decay" => self.weight_decay = parse(k, value)?,
            "clip" => self.clip = parse(k, value)?,
            "epochs" => self.epochs = parse(k, value)?,
            "batch_size" => self.batch_size = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "patience" => self.patience = parse(k, value)?,
            "attention_fusion" => self.attention_fusion = value.parse()?,
            "crf_constraints" => self.crf_constraints = parse(k, value)?,
            "embedding_source" => self.embedding_source = value.parse()?,
            "freeze_embeddings" => self.freeze_embeddings = parse(k, value)?,
            "encoder_blocks" => self.encoder_blocks = parse(k, value)?,
            "ff_dim" => self.ff_dim = parse(k, value)?,
            "max_len" => self.max_len = parse(k, value)?,
            "forget_bias" => self.forget_bias = parse(k, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "clip_mode" => self.clip_mode = clip_mode_from_str(value)?,
            "min_count" => self.min_count = parse(k, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key.replace('-', "_").as_str() {
            "lr" => format!("{:?}", self.lr),
            "dropout" => format!("{:?}", self.dropout),
            "embedding_dim" => self.embedding_dim.to_string(),
            "enc_hidden_dim" => self.enc_hidden_dim.to_string(),
            "lstm_dim" => self.lstm_dim.to_string(),
            "key_dim" => self.key_dim.to_string(),
            "val_dim" => self.val_dim.to_string(),
            "num_heads" => self.num_heads.to_string(),
            "weight_decay" => format!("{:?}", self.weight_decay),
            "clip" => format!("{:?}", self.clip),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "seed" => self.seed.to_string(),
            "patience" => self.patience.to_string(),
            "attention_fusion" => self.attention_fusion.to_string(),
            "crf_constraints" => self.crf_constraints.to_string(),
            "embedding_source" => self.embedding_source.to_string(),
            "freeze_embeddings" => self.freeze_embeddings.to_string(),
            "encoder_blocks" => self.encoder_blocks.to_string(),
            "ff_dim" => self.ff_dim.to_string(),
            "max_len" => self.max_len.to_string(),
            "forget_bias" => format!("{:?}", self.forget_bias),
            "optimizer" => self.optimizer.to_string(),
            "clip_mode" => clip_mode_name(self.clip_mode).to_string(),
            "min_count" => self.min_count.to_string(),
            _ => return None,
        })
    }

    /// All keys, one `key=value` per line. Floats are printed so they parse
    /// back to the same bits.
    pub fn to_kv(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("listed key")))
            .collect()
    }

    /// Applies the lines of a `key=value` file on top of `self`.
    pub fn apply_kv(&mut self, input: &str) -> Result<()> {
        for (i, raw) in input.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, found {line:?}", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv(input: &str) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        c.apply_kv(input)?;
        Ok(c)
    }

    /// Encoder feed-forward width after resolving the `0` default.
    pub fn effective_ff_dim(&self) -> usize {
        if self.ff_dim == 0 {
            4 * self.embedding_dim
        } else {
            self.ff_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return bad(format!("clip must be > 0, got {}", self.clip));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("enc_hidden_dim", self.enc_hidden_dim),
            ("lstm_dim", self.lstm_dim),
            ("key_dim", self.key_dim),
            ("val_dim", self.val_dim),
            ("num_heads", self.num_heads),
            ("batch_size", self.batch_size),
            ("max_len", self.max_len),
            ("min_count", self.min_count),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.enc_hidden_dim != 2 * self.lstm_dim {
            return bad(format!(
                "enc_hidden_dim ({}) must equal 2 * lstm_dim ({})",
                self.enc_hidden_dim,
                2 * self.lstm_dim
            ));
        }
        if !self.forget_bias.is_finite() {
            return bad("forget_bias must be finite".into());
        }
        Ok(())
    }
}
