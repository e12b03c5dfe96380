//! The tagging network:
//!
//! ```text
//! tokens ─► embeddings (+ encoder) or precomputed vectors ─► dropout
//!        ─► BiLSTM ─► dropout ─► self-attention (fused) ─► affine ─► CRF
//! ```

use crate::attention::{multi_head_cached, self_attend_backward, AttentionRecord, MhattParams, MultiHeadCache};
use crate::chaincrf::{neg_log_likelihood, viterbi_decode, TransitionMatrix};
use crate::corpus::{Sentence, TagId, TagScheme, Vocabulary};
use crate::embeddings::{compose_embeddings, EmbeddingTables, EncoderCache, EncoderStackParams, PrecomputedEmbeddings};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Param, Parameterized, Rng};
use crate::recurrent::{BiLstm, BiLstmCache};

use super::config::{AttentionFusion, EmbeddingSource, TrainConfig};

/// Train mode draws dropout masks from the given generator; eval mode
/// applies no dropout.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub scheme: TagScheme,
    /// Absent when vectors come from a precomputed file.
    pub tables: Option<EmbeddingTables>,
    pub encoder: EncoderStackParams,
    pub lstm: BiLstm,
    /// Absent when `attention_fusion = none`.
    pub attention: Option<MhattParams>,
    pub emission_w: Param,
    pub emission_b: Param,
    pub transitions: Param,
    mask: Vec<bool>,
    precomputed: Option<PrecomputedEmbeddings>,
}

struct Forward {
    ids: Vec<usize>,
    encoder: Option<EncoderCache>,
    drop_in: Option<Matrix>,
    lstm: BiLstmCache,
    drop_hidden: Option<Matrix>,
    attention: Option<MultiHeadCache>,
    fused: Matrix,
    emissions: Matrix,
}

fn dropout(x: &mut Matrix, p: f64, rng: &mut Rng) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    for (v, m) in x.data_mut().iter_mut().zip(mask.data_mut()) {
        if !rng.bernoulli(p) {
            *m = keep;
        }
        *v *= *m;
    }
    mask
}

impl Model {
    /// Fresh parameters drawn from `rng` in a fixed order.
    pub fn new(config: TrainConfig, vocab: Vocabulary, scheme: TagScheme, rng: &mut Rng) -> Result<Model> {
        config.validate()?;
        let d = config.embedding_dim;
        let (tables, encoder) = match config.embedding_source {
            EmbeddingSource::Trained => (
                Some(EmbeddingTables::init(vocab.len(), d, config.max_len, rng)),
                EncoderStackParams::init(
                    config.encoder_blocks,
                    d,
                    config.effective_ff_dim(),
                    config.num_heads,
                    config.key_dim,
                    config.val_dim,
                    rng,
                ),
            ),
            EmbeddingSource::Precomputed => (None, EncoderStackParams::default()),
        };
        let lstm = BiLstm::init(d, config.lstm_dim, config.forget_bias, rng);
        let d_model = config.enc_hidden_dim;
        let attention = (config.attention_fusion != AttentionFusion::None)
            .then(|| MhattParams::init("attn", d_model, config.num_heads, config.key_dim, config.val_dim, rng));
        let m = scheme.num_tags();
        let emission_w = Param::new("emission.w", rng.glorot(d_model, m, d_model, m));
        let emission_b = Param::zeros("emission.b", 1, m);
        let transitions = Param::zeros("crf.transitions", m + 2, m + 2);
        let mut t = TransitionMatrix::zeros(m);
        if config.crf_constraints {
            t.apply_scheme_constraints(&scheme);
        }
        Ok(Model {
            mask: t.mask().to_vec(),
            config,
            vocab,
            scheme,
            tables,
            encoder,
            lstm,
            attention,
            emission_w,
            emission_b,
            transitions,
            precomputed: None,
        })
    }

    /// Supplies the vectors used when `embedding_source = precomputed`.
    pub fn attach_precomputed(&mut self, p: PrecomputedEmbeddings) -> Result<()> {
        if p.dim() != self.config.embedding_dim {
            return Err(Error::Config(format!(
                "precomputed vectors have dimension {} but embedding_dim is {}",
                p.dim(),
                self.config.embedding_dim
            )));
        }
        self.precomputed = Some(p);
        Ok(())
    }

    pub fn num_tags(&self) -> usize {
        self.scheme.num_tags()
    }

    pub fn transition_matrix(&self) -> TransitionMatrix {
        TransitionMatrix::with_mask(self.num_tags(), self.transitions.value.clone(), &self.mask)
            .expect("transition shape fixed at construction")
    }

    fn forward(&self, s: &Sentence, mode: Mode<'_>) -> Result<Forward> {
        let (ids, encoder, mut x) = match (&self.tables, self.config.embedding_source) {
            (Some(tables), EmbeddingSource::Trained) => {
                let ids = self.vocab.encode(&s.tokens);
                let x0 = compose_embeddings(&ids, &vec![0; ids.len()], tables)?;
                let (x1, cache) = self.encoder.forward_cached(&x0)?;
                (ids, Some(cache), x1)
            }
            _ => {
                let p = self
                    .precomputed
                    .as_ref()
                    .ok_or_else(|| Error::Missing("precomputed embeddings (none attached)".into()))?;
                (Vec::new(), None, p.for_sentence(s)?.clone())
            }
        };
        let p = self.config.dropout;
        let mut rng = match mode {
            Mode::Train(r) if p > 0.0 => Some(r),
            _ => None,
        };
        let drop_in = rng.as_deref_mut().map(|r| dropout(&mut x, p, r));
        let (mut h, lstm) = self.lstm.forward_cached(&x)?;
        let drop_hidden = rng.map(|r| dropout(&mut h, p, r));
        let (fused, attention) = match (&self.attention, self.config.attention_fusion) {
            (Some(params), fusion) if fusion != AttentionFusion::None => {
                let (a, cache) = multi_head_cached(&h, &h, &h, params, None)?;
                let fused = if fusion == AttentionFusion::Residual {
                    h.add(&a)?
                } else {
                    a
                };
                (fused, Some(cache))
            }
            _ => (h, None),
        };
        let mut emissions = fused.matmul(&self.emission_w.value)?;
        emissions.add_row_broadcast(&self.emission_b.value)?;
        Ok(Forward {
            ids,
            encoder,
            drop_in,
            lstm,
            drop_hidden,
            attention,
            fused,
            emissions,
        })
    }

    fn check_gold(&self, s: &Sentence) -> Result<()> {
        if s.tags.len() != s.len() {
            return Err(Error::Alignment(format!(
                "{}#{} has {} tokens but {} tags",
                s.doc_id,
                s.index,
                s.len(),
                s.tags.len()
            )));
        }
        if let Some(&bad) = s.tags.iter().find(|&&t| t >= self.num_tags()) {
            return Err(Error::Index {
                what: "tag scheme",
                index: bad,
                len: self.num_tags(),
            });
        }
        Ok(())
    }

    /// Non-finite scores mean the parameters have blown up; the trainer
    /// fills in where it happened.
    fn finite_scores(emissions: &Matrix) -> Result<()> {
        if emissions.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence {
                epoch: 0,
                step: 0,
                loss: f64::NAN,
            })
        }
    }

    /// Emission scores `n × m` (eval mode).
    pub fn emissions(&self, s: &Sentence) -> Result<Matrix> {
        Ok(self.forward(s, Mode::Eval)?.emissions)
    }

    /// CRF negative log-likelihood of the sentence's gold tags.
    pub fn loss(&self, s: &Sentence, mode: Mode<'_>) -> Result<f64> {
        self.check_gold(s)?;
        if s.is_empty() {
            return Ok(0.0);
        }
        let f = self.forward(s, mode)?;
        if !f.emissions.is_finite() {
            return Ok(f64::NAN);
        }
        Ok(neg_log_likelihood(&f.emissions, &self.transition_matrix(), &s.tags)?.nll)
    }

    /// Loss of one sentence; gradients are added to every parameter's
    /// accumulator. Non-finite scores give a NaN loss and no gradients.
    pub fn forward_backward(&mut self, s: &Sentence, mode: Mode<'_>) -> Result<f64> {
        self.check_gold(s)?;
        if s.is_empty() {
            return Ok(0.0);
        }
        let f = self.forward(s, mode)?;
        if !f.emissions.is_finite() {
            return Ok(f64::NAN);
        }
        let crf = neg_log_likelihood(&f.emissions, &self.transition_matrix(), &s.tags)?;
        self.transitions.grad.add_assign(&crf.grad_transitions)?;
        let d_p = &crf.grad_emissions;
        self.emission_w.grad.add_assign(&f.fused.t_matmul(d_p)?)?;
        self.emission_b.grad.add_assign(&d_p.sum_rows())?;
        let d_fused = d_p.matmul_t(&self.emission_w.value)?;
        let mut d_h = match (&mut self.attention, &f.attention) {
            (Some(params), Some(cache)) => {
                let d_attn = self_attend_backward(cache, &d_fused, params)?;
                if self.config.attention_fusion == AttentionFusion::Residual {
                    d_attn.add(&d_fused)?
                } else {
                    d_attn
                }
            }
            _ => d_fused,
        };
        if let Some(mask) = &f.drop_hidden {
            d_h = d_h.hadamard(mask)?;
        }
        let mut d_x = self.lstm.backward(&f.lstm, &d_h)?;
        if let Some(mask) = &f.drop_in {
            d_x = d_x.hadamard(mask)?;
        }
        if let (Some(tables), Some(cache)) = (&mut self.tables, &f.encoder) {
            if !self.config.freeze_embeddings {
                let d_x0 = self.encoder.backward(cache, &d_x)?;
                tables.backward(&f.ids, &vec![0; f.ids.len()], &d_x0);
            }
        }
        Ok(crf.nll)
    }

    /// Best tag sequence under the model.
    pub fn tag(&self, s: &Sentence) -> Result<Vec<TagId>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        let f = self.forward(s, Mode::Eval)?;
        Self::finite_scores(&f.emissions)?;
        Ok(viterbi_decode(&f.emissions, &self.transition_matrix())?.0)
    }

    /// Copies of `sentences` carrying predicted tags.
    pub fn tag_all(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>> {
        sentences.iter().map(|s| Ok(s.with_tags(self.tag(s)?))).collect()
    }

    /// Per-head weights of the attention layer over the BiLSTM states.
    pub fn attention_records(&self, s: &Sentence) -> Result<Vec<AttentionRecord>> {
        if self.attention.is_none() {
            return Err(Error::Config(
                "model has no attention layer (attention_fusion=none)".into(),
            ));
        }
        if s.is_empty() {
            return Ok(Vec::new());
        }
        let f = self.forward(s, Mode::Eval)?;
        let cache = f.attention.expect("attention present");
        Ok(cache.records("attention", &s.tokens))
    }

    /// Parameters the optimizer updates. Embedding tables and encoder are
    /// left out when frozen.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Param> {
        let frozen = self.config.freeze_embeddings;
        let mut v: Vec<&mut Param> = Vec::new();
        if !frozen {
            if let Some(t) = &mut self.tables {
                v.extend(t.params_mut());
            }
            v.extend(self.encoder.params_mut());
        }
        v.extend(self.lstm.params_mut());
        if let Some(a) = &mut self.attention {
            v.extend(a.params_mut());
        }
        v.extend([&mut self.emission_w, &mut self.emission_b, &mut self.transitions]);
        v
    }
}

impl Parameterized for Model {
    fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = Vec::new();
        if let Some(t) = &self.tables {
            v.extend(t.params());
        }
        v.extend(self.encoder.params());
        v.extend(self.lstm.params());
        if let Some(a) = &self.attention {
            v.extend(a.params());
        }
        v.extend([&self.emission_w, &self.emission_b, &self.transitions]);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = Vec::new();
        if let Some(t) = &mut self.tables {
            v.extend(t.params_mut());
        }
        v.extend(self.encoder.params_mut());
        v.extend(self.lstm.params_mut());
        if let Some(a) = &mut self.attention {
            v.extend(a.params_mut());
        }
        v.extend([&mut self.emission_w, &mut self.emission_b, &mut self.transitions]);
        v
    }
}
