//! Scaled dot-product and multi-head attention with backward passes, plus
//! export of the per-head weight matrices.
//!
//! ```text
//! Attention(Q, K, V) = softmax(QKᵀ / √d_k) V
//! head_i            = Attention(Q·W^Q_i, K·W^K_i, V·W^V_i)
//! MultiHead(Q,K,V)  = [head_1, …, head_h] · W^O
//! ```

use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numkernel::{row_softmax, Matrix, Param, Parameterized, Rng};

/// Weights of one attention map. Rows are attending tokens, columns the
/// attended ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub layer: String,
    pub head: usize,
    pub weights: Matrix,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w_q: Param,
    pub w_k: Param,
    pub w_v: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhattParams {
    pub heads: Vec<HeadParams>,
    pub w_o: Param,
    d_model: usize,
    d_k: usize,
    d_v: usize,
}

impl MhattParams {
    pub fn zeros(prefix: &str, d_model: usize, num_heads: usize, d_k: usize, d_v: usize) -> Self {
        let heads = (0..num_heads)
            .map(|i| HeadParams {
                w_q: Param::zeros(format!("{prefix}.h{i}.w_q"), d_model, d_k),
                w_k: Param::zeros(format!("{prefix}.h{i}.w_k"), d_model, d_k),
                w_v: Param::zeros(format!("{prefix}.h{i}.w_v"), d_model, d_v),
            })
            .collect();
        MhattParams {
            heads,
            w_o: Param::zeros(format!("{prefix}.w_o"), num_heads * d_v, d_model),
            d_model,
            d_k,
            d_v,
        }
    }

    pub fn init(prefix: &str, d_model: usize, num_heads: usize, d_k: usize, d_v: usize, rng: &mut Rng) -> Self {
        let mut p = MhattParams::zeros(prefix, d_model, num_heads, d_k, d_v);
        for h in &mut p.heads {
            h.w_q.value = rng.glorot(d_model, d_k, d_model, d_k);
            h.w_k.value = rng.glorot(d_model, d_k, d_model, d_k);
            h.w_v.value = rng.glorot(d_model, d_v, d_model, d_v);
        }
        p.w_o.value = rng.glorot(num_heads * d_v, d_model, num_heads * d_v, d_model);
        p
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    fn check(&self) -> Result<()> {
        let bad = |p: &Param, want: (usize, usize)| {
            Err(Error::Dimension {
                op: "multi_head parameters",
                left: p.shape(),
                right: want,
            })
        };
        for h in &self.heads {
            for (p, want) in [
                (&h.w_q, (self.d_model, self.d_k)),
                (&h.w_k, (self.d_model, self.d_k)),
                (&h.w_v, (self.d_model, self.d_v)),
            ] {
                if p.shape() != want {
                    return bad(p, want);
                }
            }
        }
        let want = (self.heads.len() * self.d_v, self.d_model);
        if self.w_o.shape() != want {
            return bad(&self.w_o, want);
        }
        Ok(())
    }
}

impl Parameterized for MhattParams {
    fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.heads.iter().flat_map(|h| [&h.w_q, &h.w_k, &h.w_v]).collect();
        v.push(&self.w_o);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self
            .heads
            .iter_mut()
            .flat_map(|h| [&mut h.w_q, &mut h.w_k, &mut h.w_v])
            .collect();
        v.push(&mut self.w_o);
        v
    }
}

/// Logits `QKᵀ/√d_k` with masked keys set to −∞.
pub fn attention_logits(q: &Matrix, k: &Matrix, key_mask: Option<&[bool]>) -> Result<Matrix> {
    if q.cols() == 0 || q.cols() != k.cols() {
        return Err(Error::Dimension {
            op: "attention logits",
            left: q.shape(),
            right: k.shape(),
        });
    }
    let mut s = q.matmul_t(k)?;
    s.scale_in_place(1.0 / (q.cols() as f64).sqrt());
    if let Some(mask) = key_mask {
        if mask.len() != k.rows() {
            return Err(Error::Dimension {
                op: "attention key mask",
                left: (mask.len(), 1),
                right: k.shape(),
            });
        }
        for r in 0..s.rows() {
            for (c, &keep) in mask.iter().enumerate() {
                if !keep {
                    s.set(r, c, f64::NEG_INFINITY);
                }
            }
        }
    }
    Ok(s)
}

/// Returns `(output, weights)`. A `false` entry in `key_mask` removes that
/// key from every row's softmax.
pub fn scaled_dot_attention_masked(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    key_mask: Option<&[bool]>,
) -> Result<(Matrix, Matrix)> {
    if k.rows() != v.rows() {
        return Err(Error::Dimension {
            op: "attention keys/values",
            left: k.shape(),
            right: v.shape(),
        });
    }
    let weights = row_softmax(&attention_logits(q, k, key_mask)?);
    let out = weights.matmul(v)?;
    Ok((out, weights))
}

pub fn scaled_dot_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<(Matrix, Matrix)> {
    scaled_dot_attention_masked(q, k, v, None)
}

/// Gradients `(dQ, dK, dV)` of scaled dot-product attention given the
/// forward weights and `dOut`.
pub fn scaled_dot_attention_backward(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    weights: &Matrix,
    d_out: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let dv = weights.t_matmul(d_out)?;
    let dw = d_out.matmul_t(v)?;
    let mut ds = Matrix::zeros(weights.rows(), weights.cols());
    for r in 0..weights.rows() {
        let (w, g) = (weights.row(r), dw.row(r));
        let inner: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
        for (c, out) in ds.row_mut(r).iter_mut().enumerate() {
            *out = w[c] * (g[c] - inner);
        }
    }
    ds.scale_in_place(1.0 / (q.cols() as f64).sqrt());
    let dq = ds.matmul(k)?;
    let dk = ds.t_matmul(q)?;
    Ok((dq, dk, dv))
}

/// Intermediate values of one multi-head pass.
#[derive(Debug, Clone)]
pub struct MultiHeadCache {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    projected: Vec<(Matrix, Matrix, Matrix)>,
    weights: Vec<Matrix>,
    concat: Matrix,
}

impl MultiHeadCache {
    /// Per-head weight matrices.
    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn records(&self, layer: &str, tokens: &[String]) -> Vec<AttentionRecord> {
        self.weights
            .iter()
            .enumerate()
            .map(|(head, w)| AttentionRecord {
                layer: layer.to_string(),
                head,
                weights: w.clone(),
                tokens: tokens.to_vec(),
            })
            .collect()
    }
}

pub fn multi_head_cached(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    params: &MhattParams,
    key_mask: Option<&[bool]>,
) -> Result<(Matrix, MultiHeadCache)> {
    params.check()?;
    for m in [q, k, v] {
        if m.cols() != params.d_model {
            return Err(Error::Dimension {
                op: "multi_head input",
                left: m.shape(),
                right: (m.rows(), params.d_model),
            });
        }
    }
    let mut projected = Vec::with_capacity(params.heads.len());
    let mut weights = Vec::with_capacity(params.heads.len());
    let mut outs = Vec::with_capacity(params.heads.len());
    for h in &params.heads {
        let qh = q.matmul(&h.w_q.value)?;
        let kh = k.matmul(&h.w_k.value)?;
        let vh = v.matmul(&h.w_v.value)?;
        let (o, w) = scaled_dot_attention_masked(&qh, &kh, &vh, key_mask)?;
        projected.push((qh, kh, vh));
        weights.push(w);
        outs.push(o);
    }
    let concat = Matrix::hconcat(&outs)?;
    let out = concat.matmul(&params.w_o.value)?;
    let cache = MultiHeadCache {
        q: q.clone(),
        k: k.clone(),
        v: v.clone(),
        projected,
        weights,
        concat,
    };
    Ok((out, cache))
}

/// Multi-head attention. Records carry empty token lists; callers attach
/// tokens with [`MultiHeadCache::records`] when they have them.
pub fn multi_head(q: &Matrix, k: &Matrix, v: &Matrix, params: &MhattParams) -> Result<(Matrix, Vec<AttentionRecord>)> {
    let (out, cache) = multi_head_cached(q, k, v, params, None)?;
    Ok((out, cache.records("attention", &[])))
}

/// Accumulates parameter gradients and returns `(dQ, dK, dV)`.
pub fn multi_head_backward(
    cache: &MultiHeadCache,
    d_out: &Matrix,
    params: &mut MhattParams,
) -> Result<(Matrix, Matrix, Matrix)> {
    params.w_o.grad.add_assign(&cache.concat.t_matmul(d_out)?)?;
    let d_concat = d_out.matmul_t(&params.w_o.value)?;
    let mut dq = Matrix::zeros(cache.q.rows(), cache.q.cols());
    let mut dk = Matrix::zeros(cache.k.rows(), cache.k.cols());
    let mut dv = Matrix::zeros(cache.v.rows(), cache.v.cols());
    let d_v = params.d_v;
    for (i, h) in params.heads.iter_mut().enumerate() {
        let (qh, kh, vh) = &cache.projected[i];
        let d_head = d_concat.slice_cols(i * d_v, (i + 1) * d_v);
        let (dqh, dkh, dvh) = scaled_dot_attention_backward(qh, kh, vh, &cache.weights[i], &d_head)?;
        h.w_q.grad.add_assign(&cache.q.t_matmul(&dqh)?)?;
        h.w_k.grad.add_assign(&cache.k.t_matmul(&dkh)?)?;
        h.w_v.grad.add_assign(&cache.v.t_matmul(&dvh)?)?;
        dq.add_assign(&dqh.matmul_t(&h.w_q.value)?)?;
        dk.add_assign(&dkh.matmul_t(&h.w_k.value)?)?;
        dv.add_assign(&dvh.matmul_t(&h.w_v.value)?)?;
    }
    Ok((dq, dk, dv))
}

/// `multi_head(H, H, H)`.
pub fn self_attend(h: &Matrix, params: &MhattParams) -> Result<(Matrix, Vec<AttentionRecord>)> {
    multi_head(h, h, h, params)
}

/// Backward of [`self_attend`]: the three input gradients summed.
pub fn self_attend_backward(cache: &MultiHeadCache, d_out: &Matrix, params: &mut MhattParams) -> Result<Matrix> {
    let (mut dq, dk, dv) = multi_head_backward(cache, d_out, params)?;
    dq.add_assign(&dk)?;
    dq.add_assign(&dv)?;
    Ok(dq)
}

/// Attention maps for one tagged sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExport {
    pub doc_id: String,
    pub sentence: usize,
    pub tokens: Vec<String>,
    pub records: Vec<AttentionRecord>,
}

pub const EXPORT_FORMAT: &str = "chemner-attention";
pub const EXPORT_VERSION: u32 = 1;

impl AttentionExport {
    /// JSON with weights printed to six decimals:
    ///
    /// ```text
    /// {"format": "chemner-attention", "version": 1, "doc_id": "...",
    ///  "sentence": 0, "tokens": [...],
    ///  "records": [{"layer": "...", "head": 0, "weights": [[...], ...]}]}
    /// ```
    pub fn to_json(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("string serialization");
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"format\": {},", q(EXPORT_FORMAT));
        let _ = writeln!(out, "  \"version\": {EXPORT_VERSION},");
        let _ = writeln!(out, "  \"doc_id\": {},", q(&self.doc_id));
        let _ = writeln!(out, "  \"sentence\": {},", self.sentence);
        let toks: Vec<String> = self.tokens.iter().map(|t| q(t)).collect();
        let _ = writeln!(out, "  \"tokens\": [{}],", toks.join(", "));
        out.push_str("  \"records\": [");
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = writeln!(
                out,
                "    {{\"layer\": {}, \"head\": {}, \"weights\": [",
                q(&r.layer),
                r.head
            );
            for row in 0..r.weights.rows() {
                let cells: Vec<String> = r.weights.row(row).iter().map(|w| format!("{w:.6}")).collect();
                let sep = if row + 1 < r.weights.rows() { "," } else { "" };
                let _ = writeln!(out, "      [{}]{sep}", cells.join(", "));
            }
            out.push_str("    ]}");
        }
        out.push_str(if self.records.is_empty() { "]\n" } else { "\n  ]\n" });
        out.push_str("}\n");
        out
    }

    pub fn from_json(input: &str) -> Result<AttentionExport> {
        #[derive(Deserialize)]
        struct RawRecord {
            layer: String,
            head: usize,
            weights: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        struct Raw {
            format: String,
            version: u32,
            doc_id: String,
            sentence: usize,
            tokens: Vec<String>,
            records: Vec<RawRecord>,
        }
        let fmt_err = |msg: String| Error::Format {
            what: "attention export",
            offset: 0,
            msg,
        };
        let raw: Raw = serde_json::from_str(input).map_err(|e| fmt_err(e.to_string()))?;
        if raw.format != EXPORT_FORMAT || raw.version != EXPORT_VERSION {
            return Err(fmt_err(format!("unsupported format {} v{}", raw.format, raw.version)));
        }
        let n = raw.tokens.len();
        let mut records = Vec::with_capacity(raw.records.len());
        for r in raw.records {
            if r.weights.len() != n || r.weights.iter().any(|row| row.len() != n) {
                return Err(fmt_err(format!("head {} weights are not {n}x{n}", r.head)));
            }
            records.push(AttentionRecord {
                layer: r.layer,
                head: r.head,
                weights: Matrix::from_rows(&r.weights)?,
                tokens: raw.tokens.clone(),
            });
        }
        Ok(AttentionExport {
            doc_id: raw.doc_id,
            sentence: raw.sentence,
            tokens: raw.tokens,
            records,
        })
    }

    /// One panel per head. Each token on the left is joined to every token
    /// on the right by a line whose opacity is the attention weight.
    /// `heads` restricts which heads are drawn.
    pub fn to_svg(&self, heads: Option<&[usize]>) -> String {
        const PALETTE: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
        ];
        let shown: Vec<&AttentionRecord> = self
            .records
            .iter()
            .filter(|r| heads.is_none_or(|hs| hs.contains(&r.head)))
            .collect();
        let n = self.tokens.len();
        let longest = self.tokens.iter().map(|t| t.chars().count()).max().unwrap_or(1);
        let text_w = 7.0 * longest as f64 + 10.0;
        let gap = 120.0;
        let row_h = 18.0;
        let panel_w = 2.0 * text_w + gap;
        let top = 40.0;
        let width = (panel_w + 20.0) * shown.len().max(1) as f64;
        let height = top + row_h * n as f64 + 20.0;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"monospace\" font-size=\"12\">"
        );
        for (p, r) in shown.iter().enumerate() {
            let color = PALETTE[r.head % PALETTE.len()];
            let x0 = p as f64 * (panel_w + 20.0) + 10.0;
            let (left_x, right_x) = (x0 + text_w, x0 + text_w + gap);
            let _ = writeln!(svg, "  <g class=\"head\" data-head=\"{}\">", r.head);
            let _ = writeln!(
                svg,
                "    <text x=\"{:.1}\" y=\"20\" fill=\"{color}\">{} head {}</text>",
                x0,
                escape_xml(&r.layer),
                r.head
            );
            for (i, tok) in self.tokens.iter().enumerate() {
                let y = top + row_h * i as f64;
                let t = escape_xml(tok);
                let _ = writeln!(
                    svg,
                    "    <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{t}</text>",
                    left_x - 4.0,
                    y + 4.0
                );
                let _ = writeln!(
                    svg,
                    "    <text x=\"{:.1}\" y=\"{:.1}\">{t}</text>",
                    right_x + 4.0,
                    y + 4.0
                );
            }
            for i in 0..n.min(r.weights.rows()) {
                for j in 0..n.min(r.weights.cols()) {
                    let w = r.weights.get(i, j);
                    if w < 0.005 {
                        continue;
                    }
                    let _ = writeln!(
                        svg,
                        "    <line x1=\"{left_x:.1}\" y1=\"{:.1}\" x2=\"{right_x:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\" stroke-opacity=\"{w:.4}\"/>",
                        top + row_h * i as f64,
                        top + row_h * j as f64
                    );
                }
            }
            svg.push_str("  </g>\n");
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{grad_check, relative_error};

    fn weighted_sum(m: &Matrix, w: &Matrix) -> f64 {
        m.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn single_key_gets_all_weight() {
        let q = Matrix::from_rows(&[[0.3, 1.0], [-2.0, 0.5]]).unwrap();
        let k = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let v = Matrix::from_rows(&[[4.0, 5.0, 6.0]]).unwrap();
        let (out, w) = scaled_dot_attention(&q, &k, &v).unwrap();
        assert_eq!(w, Matrix::filled(2, 1, 1.0));
        assert_eq!(out.row(0), v.row(0));
        assert_eq!(out.row(1), v.row(0));
    }

    #[test]
    fn identical_keys_average_values() {
        let q = Matrix::from_rows(&[[0.3, 1.0]]).unwrap();
        let k = Matrix::filled(4, 2, 0.7);
        let v = Matrix::from_rows(&[[1.0], [2.0], [3.0], [6.0]]).unwrap();
        let (out, w) = scaled_dot_attention(&q, &k, &v).unwrap();
        assert!(w.data().iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert!((out.get(0, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_oracle() {
        let q = Matrix::from_rows(&[[1.0]]).unwrap();
        let k = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let v = Matrix::from_rows(&[[2.0], [0.0]]).unwrap();
        let (out, w) = scaled_dot_attention(&q, &k, &v).unwrap();
        // Logits 1 and -1, so the first weight is σ(2).
        let w0 = 0.880_797_077_977_882_4;
        assert!((w.get(0, 0) - w0).abs() < 1e-12);
        assert!((w.get(0, 1) - (1.0 - w0)).abs() < 1e-12);
        assert!((out.get(0, 0) - 2.0 * w0).abs() < 1e-12);
    }

    #[test]
    fn zero_key_dim_is_rejected() {
        let z = Matrix::zeros(2, 0);
        assert!(scaled_dot_attention(&z, &z, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn logit_scale_is_exact() {
        let mut rng = Rng::new(3);
        let q = rng.uniform_matrix(3, 4, -1.0, 1.0);
        let k = rng.uniform_matrix(5, 4, -1.0, 1.0);
        let base = attention_logits(&q, &k, None).unwrap();
        let c = 2.0;
        let scaled = attention_logits(&q.scale(c), &k.scale(c), None).unwrap();
        for (a, b) in base.data().iter().zip(scaled.data()) {
            assert_eq!(a * c * c, *b);
        }
        let raw = q.matmul_t(&k).unwrap();
        for (a, b) in raw.data().iter().zip(base.data()) {
            assert!((a / 2.0 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_keys_get_zero_weight() {
        let mut rng = Rng::new(4);
        let x = rng.uniform_matrix(4, 3, -1.0, 1.0);
        let mask = [true, false, true, false];
        let (_, w) = scaled_dot_attention_masked(&x, &x, &x, Some(&mask)).unwrap();
        for r in 0..4 {
            assert_eq!(w.get(r, 1), 0.0);
            assert_eq!(w.get(r, 3), 0.0);
            assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_identity_head_reduces_to_plain_attention() {
        let mut rng = Rng::new(5);
        let d = 3;
        let mut p = MhattParams::zeros("a", d, 1, d, d);
        p.heads[0].w_q.value = Matrix::identity(d);
        p.heads[0].w_k.value = Matrix::identity(d);
        p.heads[0].w_v.value = Matrix::identity(d);
        p.w_o.value = Matrix::identity(d);
        let q = rng.uniform_matrix(4, d, -1.0, 1.0);
        let k = rng.uniform_matrix(5, d, -1.0, 1.0);
        let v = rng.uniform_matrix(5, d, -1.0, 1.0);
        let (mh, recs) = multi_head(&q, &k, &v, &p).unwrap();
        let (plain, w) = scaled_dot_attention(&q, &k, &v).unwrap();
        assert!(mh.max_abs_diff(&plain) < 1e-15);
        assert_eq!(recs[0].weights, w);
    }

    #[test]
    fn zero_value_projection_gives_zero_output() {
        let mut rng = Rng::new(6);
        let mut p = MhattParams::init("a", 4, 2, 3, 3, &mut rng);
        for h in &mut p.heads {
            h.w_v.value.fill(0.0);
        }
        let x = rng.uniform_matrix(3, 4, -1.0, 1.0);
        let (out, _) = self_attend(&x, &p).unwrap();
        assert_eq!(out, Matrix::zeros(3, 4));
    }

    #[test]
    fn default_shapes() {
        let mut rng = Rng::new(7);
        let p = MhattParams::init("a", 256, 3, 64, 64, &mut rng);
        let x = rng.uniform_matrix(5, 256, -1.0, 1.0);
        let (out, recs) = self_attend(&x, &p).unwrap();
        assert_eq!(out.shape(), (5, 256));
        assert_eq!(recs.len(), 3);
        for r in &recs {
            for row in 0..5 {
                assert!((r.weights.row(row).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(r.weights.row(row).iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn bad_parameter_shapes() {
        let mut p = MhattParams::zeros("a", 4, 2, 3, 3);
        p.w_o = Param::zeros("a.w_o", 5, 4);
        assert!(self_attend(&Matrix::zeros(2, 4), &p).is_err());
        let p = MhattParams::zeros("a", 4, 2, 3, 3);
        assert!(self_attend(&Matrix::zeros(2, 5), &p).is_err());
    }

    #[test]
    fn single_token_is_projection_chain() {
        let mut rng = Rng::new(8);
        let p = MhattParams::init("a", 4, 2, 3, 2, &mut rng);
        let x = rng.uniform_matrix(1, 4, -1.0, 1.0);
        let (out, _) = self_attend(&x, &p).unwrap();
        let heads: Vec<Matrix> = p.heads.iter().map(|h| x.matmul(&h.w_v.value).unwrap()).collect();
        let expected = Matrix::hconcat(&heads).unwrap().matmul(&p.w_o.value).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn self_attention_is_permutation_equivariant() {
        let mut rng = Rng::new(9);
        let p = MhattParams::init("a", 6, 3, 4, 4, &mut rng);
        let x = rng.uniform_matrix(5, 6, -1.0, 1.0);
        let order = [3, 0, 4, 1, 2];
        let (out, _) = self_attend(&x, &p).unwrap();
        let (perm_out, _) = self_attend(&x.permute_rows(&order), &p).unwrap();
        assert!(perm_out.max_abs_diff(&out.permute_rows(&order)) < 1e-9);
    }

    #[test]
    fn attention_backward_matches_central_differences() {
        let mut rng = Rng::new(10);
        let q = rng.uniform_matrix(3, 2, -1.0, 1.0);
        let k = rng.uniform_matrix(4, 2, -1.0, 1.0);
        let v = rng.uniform_matrix(4, 3, -1.0, 1.0);
        let g = rng.uniform_matrix(3, 3, -1.0, 1.0);
        let (_, w) = scaled_dot_attention(&q, &k, &v).unwrap();
        let (dq, dk, dv) = scaled_dot_attention_backward(&q, &k, &v, &w, &g).unwrap();
        let loss = |q: &Matrix, k: &Matrix, v: &Matrix| weighted_sum(&scaled_dot_attention(q, k, v).unwrap().0, &g);
        let eps = 1e-5;
        for (which, analytic) in [(0, &dq), (1, &dk), (2, &dv)] {
            for idx in 0..analytic.len() {
                let mut args = [q.clone(), k.clone(), v.clone()];
                args[which].data_mut()[idx] += eps;
                let plus = loss(&args[0], &args[1], &args[2]);
                args[which].data_mut()[idx] -= 2.0 * eps;
                let minus = loss(&args[0], &args[1], &args[2]);
                let num = (plus - minus) / (2.0 * eps);
                assert!(
                    relative_error(analytic.data()[idx], num) < 1e-6,
                    "input {which} entry {idx}"
                );
            }
        }
    }

    #[test]
    fn self_attend_gradients_match_central_differences() {
        let mut rng = Rng::new(11);
        let mut p = MhattParams::init("a", 4, 2, 3, 2, &mut rng);
        let x = rng.uniform_matrix(5, 4, -1.0, 1.0);
        let g = rng.uniform_matrix(5, 4, -1.0, 1.0);
        let mask = [true, true, false, true, true];
        let (_, cache) = multi_head_cached(&x, &x, &x, &p, Some(&mask)).unwrap();
        let dx = self_attend_backward(&cache, &g, &mut p).unwrap();
        let report = grad_check(
            &mut p,
            |p: &MhattParams| weighted_sum(&multi_head_cached(&x, &x, &x, p, Some(&mask)).unwrap().0, &g),
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-5, "{:?}", report.worst());
        let eps = 1e-5;
        for idx in 0..x.len() {
            let mut a = x.clone();
            a.data_mut()[idx] += eps;
            let mut b = x.clone();
            b.data_mut()[idx] -= eps;
            let f = |m: &Matrix| weighted_sum(&multi_head_cached(m, m, m, &p, Some(&mask)).unwrap().0, &g);
            let num = (f(&a) - f(&b)) / (2.0 * eps);
            assert!(relative_error(dx.data()[idx], num) < 1e-5);
        }
    }

    fn sample_export() -> AttentionExport {
        let mut rng = Rng::new(12);
        let p = MhattParams::init("a", 4, 3, 2, 2, &mut rng);
        let x = rng.uniform_matrix(3, 4, -1.0, 1.0);
        let tokens: Vec<String> = ["PDMS", "<b>", "\"acid\""].iter().map(|s| s.to_string()).collect();
        let (_, cache) = multi_head_cached(&x, &x, &x, &p, None).unwrap();
        AttentionExport {
            doc_id: "d1".into(),
            sentence: 2,
            records: cache.records("attention", &tokens),
            tokens,
        }
    }

    #[test]
    fn export_round_trip_at_six_decimals() {
        let e = sample_export();
        let json = e.to_json();
        let back = AttentionExport::from_json(&json).unwrap();
        assert_eq!(back.tokens, e.tokens);
        assert_eq!(back.records.len(), 3);
        for (a, b) in back.records.iter().zip(&e.records) {
            assert!(a.weights.max_abs_diff(&b.weights) <= 5e-7);
        }
        assert_eq!(AttentionExport::from_json(&json).unwrap().to_json(), json);
        assert!(AttentionExport::from_json("{}").is_err());
    }

    #[test]
    fn svg_has_one_panel_per_selected_head() {
        let e = sample_export();
        let svg = e.to_svg(None);
        assert_eq!(svg.matches("<g class=\"head\"").count(), 3);
        assert!(svg.contains("&lt;b&gt;"));
        let only = e.to_svg(Some(&[1]));
        assert_eq!(only.matches("<g class=\"head\"").count(), 1);
        assert!(only.contains("data-head=\"1\""));
    }
}
