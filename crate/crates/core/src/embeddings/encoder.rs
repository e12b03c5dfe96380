//! Post-norm transformer blocks:
//!
//! ```text
//! y = LN₁(x + MultiHead(x, x, x))
//! z = LN₂(y + W₂·gelu(W₁·y + b₁) + b₂)
//! ```

use crate::attention::{multi_head_cached, self_attend_backward, MhattParams, MultiHeadCache};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Param, Parameterized, Rng};

pub const LN_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let t = (k * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

/// Row-wise layer normalization with a learned gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(prefix: &str, dim: usize) -> Self {
        LayerNorm {
            gain: Param::new(format!("{prefix}.gain"), Matrix::filled(1, dim, 1.0)),
            bias: Param::zeros(format!("{prefix}.bias"), 1, dim),
        }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, LayerNormCache) {
        let d = x.cols();
        let mut normalized = Matrix::zeros(x.rows(), d);
        let mut out = Matrix::zeros(x.rows(), d);
        let mut inv_std = Vec::with_capacity(x.rows());
        let (g, b) = (self.gain.value.row(0), self.bias.value.row(0));
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..d {
                let xh = (row[c] - mean) * is;
                normalized.set(r, c, xh);
                out.set(r, c, g[c] * xh + b[c]);
            }
        }
        (out, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, d_out: &Matrix) -> Matrix {
        let d = d_out.cols();
        let mut dx = Matrix::zeros(d_out.rows(), d);
        for r in 0..d_out.rows() {
            let (dy, xh) = (d_out.row(r), cache.normalized.row(r));
            let mut dxh = vec![0.0; d];
            for c in 0..d {
                self.gain.grad.add_at(0, c, dy[c] * xh[c]);
                self.bias.grad.add_at(0, c, dy[c]);
                dxh[c] = dy[c] * self.gain.value.get(0, c);
            }
            let mean_d = dxh.iter().sum::<f64>() / d as f64;
            let mean_dx = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                *o = cache.inv_std[r] * (dxh[c] - mean_d - xh[c] * mean_dx);
            }
        }
        dx
    }
}

/// Parameter-free layer normalization (unit gain, zero bias).
pub fn layer_norm(x: &Matrix) -> Matrix {
    LayerNorm::new("ln", x.cols()).forward(x).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub attention: MhattParams,
    pub norm1: LayerNorm,
    pub ff_in: Param,
    pub ff_in_bias: Param,
    pub ff_out: Param,
    pub ff_out_bias: Param,
    pub norm2: LayerNorm,
}

#[derive(Debug, Clone)]
struct BlockCache {
    attn: MultiHeadCache,
    ln1: LayerNormCache,
    y: Matrix,
    pre_act: Matrix,
    act: Matrix,
    ln2: LayerNormCache,
}

impl EncoderBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn init(prefix: &str, d: usize, d_ff: usize, heads: usize, d_k: usize, d_v: usize, rng: &mut Rng) -> Self {
        EncoderBlock {
            attention: MhattParams::init(&format!("{prefix}.attn"), d, heads, d_k, d_v, rng),
            norm1: LayerNorm::new(&format!("{prefix}.ln1"), d),
            ff_in: Param::new(format!("{prefix}.ff_in"), rng.glorot(d, d_ff, d, d_ff)),
            ff_in_bias: Param::zeros(format!("{prefix}.ff_in_bias"), 1, d_ff),
            ff_out: Param::new(format!("{prefix}.ff_out"), rng.glorot(d_ff, d, d_ff, d)),
            ff_out_bias: Param::zeros(format!("{prefix}.ff_out_bias"), 1, d),
            norm2: LayerNorm::new(&format!("{prefix}.ln2"), d),
        }
    }

    fn forward(&self, x: &Matrix) -> Result<(Matrix, BlockCache)> {
        let (a, attn) = multi_head_cached(x, x, x, &self.attention, None)?;
        let (y, ln1) = self.norm1.forward(&x.add(&a)?);
        let mut pre_act = y.matmul(&self.ff_in.value)?;
        pre_act.add_row_broadcast(&self.ff_in_bias.value)?;
        let act = pre_act.map(gelu);
        let mut f = act.matmul(&self.ff_out.value)?;
        f.add_row_broadcast(&self.ff_out_bias.value)?;
        let (z, ln2) = self.norm2.forward(&y.add(&f)?);
        Ok((
            z,
            BlockCache {
                attn,
                ln1,
                y,
                pre_act,
                act,
                ln2,
            },
        ))
    }

    fn backward(&mut self, cache: &BlockCache, d_out: &Matrix) -> Result<Matrix> {
        let ds2 = self.norm2.backward(&cache.ln2, d_out);
        self.ff_out.grad.add_assign(&cache.act.t_matmul(&ds2)?)?;
        self.ff_out_bias.grad.add_assign(&ds2.sum_rows())?;
        let d_act = ds2.matmul_t(&self.ff_out.value)?;
        let mut d_pre = d_act;
        for (g, &x) in d_pre.data_mut().iter_mut().zip(cache.pre_act.data()) {
            *g *= gelu_grad(x);
        }
        self.ff_in.grad.add_assign(&cache.y.t_matmul(&d_pre)?)?;
        self.ff_in_bias.grad.add_assign(&d_pre.sum_rows())?;
        let mut dy = ds2;
        dy.add_assign(&d_pre.matmul_t(&self.ff_in.value)?)?;
        let ds1 = self.norm1.backward(&cache.ln1, &dy);
        let mut dx = self_attend_backward(&cache.attn, &ds1, &mut self.attention)?;
        dx.add_assign(&ds1)?;
        Ok(dx)
    }

    /// Attention weights of this block from a forward pass.
    pub fn attention_weights(cache: &EncoderCache, block: usize) -> &[Matrix] {
        cache.blocks[block].attn.weights()
    }
}

impl Parameterized for EncoderBlock {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.attention.params();
        v.extend([
            &self.norm1.gain,
            &self.norm1.bias,
            &self.ff_in,
            &self.ff_in_bias,
            &self.ff_out,
            &self.ff_out_bias,
            &self.norm2.gain,
            &self.norm2.bias,
        ]);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.attention.params_mut();
        v.extend([
            &mut self.norm1.gain,
            &mut self.norm1.bias,
            &mut self.ff_in,
            &mut self.ff_in_bias,
            &mut self.ff_out,
            &mut self.ff_out_bias,
            &mut self.norm2.gain,
            &mut self.norm2.bias,
        ]);
        v
    }
}

/// A stack of encoder blocks; zero blocks is the identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EncoderStackParams {
    pub blocks: Vec<EncoderBlock>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    blocks: Vec<BlockCache>,
}

impl EncoderStackParams {
    #[allow(clippy::too_many_arguments)]
    pub fn init(num_blocks: usize, d: usize, d_ff: usize, heads: usize, d_k: usize, d_v: usize, rng: &mut Rng) -> Self {
        EncoderStackParams {
            blocks: (0..num_blocks)
                .map(|i| EncoderBlock::init(&format!("enc.{i}"), d, d_ff, heads, d_k, d_v, rng))
                .collect(),
        }
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, EncoderCache)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            if b.attention.d_model() != h.cols() {
                return Err(Error::Dimension {
                    op: "encode_stack",
                    left: h.shape(),
                    right: (h.rows(), b.attention.d_model()),
                });
            }
            let (next, c) = b.forward(&h)?;
            caches.push(c);
            h = next;
        }
        Ok((h, EncoderCache { blocks: caches }))
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.forward_cached(x).map(|(m, _)| m)
    }

    pub fn backward(&mut self, cache: &EncoderCache, d_out: &Matrix) -> Result<Matrix> {
        let mut d = d_out.clone();
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            d = b.backward(c, &d)?;
        }
        Ok(d)
    }
}

impl Parameterized for EncoderStackParams {
    fn params(&self) -> Vec<&Param> {
        self.blocks.iter().flat_map(|b| b.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{grad_check, relative_error};

    #[test]
    fn empty_stack_is_identity() {
        let mut rng = Rng::new(1);
        let x = rng.uniform_matrix(3, 4, -1.0, 1.0);
        assert_eq!(EncoderStackParams::default().encode(&x).unwrap(), x);
    }

    #[test]
    fn shape_is_preserved() {
        let mut rng = Rng::new(2);
        let s = EncoderStackParams::init(2, 8, 32, 2, 4, 4, &mut rng);
        let x = rng.uniform_matrix(5, 8, -1.0, 1.0);
        assert_eq!(s.encode(&x).unwrap().shape(), (5, 8));
        assert!(s.encode(&Matrix::zeros(5, 6)).is_err());
    }

    #[test]
    fn zero_branches_reduce_to_normalized_residual() {
        let mut rng = Rng::new(3);
        let mut s = EncoderStackParams::init(2, 6, 12, 2, 3, 3, &mut rng);
        for b in &mut s.blocks {
            b.ff_in.value.fill(0.0);
            b.ff_out.value.fill(0.0);
            for h in &mut b.attention.heads {
                h.w_v.value.fill(0.0);
            }
        }
        let x = rng.uniform_matrix(4, 6, -3.0, 3.0);
        let out = s.encode(&x).unwrap();
        let expected = layer_norm(&layer_norm(&layer_norm(&layer_norm(&x))));
        assert!(out.is_finite());
        assert!(out.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let mut rng = Rng::new(4);
        let y = layer_norm(&rng.uniform_matrix(3, 10, -5.0, 5.0));
        for r in 0..3 {
            let mean = y.row(r).iter().sum::<f64>() / 10.0;
            let var = y.row(r).iter().map(|v| v * v).sum::<f64>() / 10.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_191_990_607_9).abs() < 1e-12);
        let h = 1e-6;
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let num = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - num).abs() < 1e-8);
        }
    }

    #[test]
    fn sum_of_outputs_gradient_check() {
        let mut rng = Rng::new(5);
        let mut s = EncoderStackParams::init(2, 4, 8, 2, 3, 2, &mut rng);
        // Move norm parameters off their defaults so their gradients matter.
        for b in &mut s.blocks {
            b.norm1.gain.value = rng.uniform_matrix(1, 4, 0.5, 1.5);
            b.norm2.bias.value = rng.uniform_matrix(1, 4, -0.5, 0.5);
        }
        let x = rng.uniform_matrix(3, 4, -1.0, 1.0);
        // Sum of a layer-normalized output is constant, so weight it.
        let w = rng.uniform_matrix(3, 4, -1.0, 1.0);
        let loss = |s: &EncoderStackParams, x: &Matrix| -> f64 {
            let out = s.encode(x).unwrap();
            out.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>() + out.sum()
        };
        let (_, cache) = s.forward_cached(&x).unwrap();
        let d_out = w.map(|v| v + 1.0);
        let dx = s.backward(&cache, &d_out).unwrap();
        let report = grad_check(&mut s, |s: &EncoderStackParams| loss(s, &x), 1e-5).unwrap();
        assert!(report.max_rel_error() < 1e-4, "{:?}", report.worst());
        let eps = 1e-5;
        for idx in 0..x.len() {
            let mut a = x.clone();
            a.data_mut()[idx] += eps;
            let mut b = x.clone();
            b.data_mut()[idx] -= eps;
            let num = (loss(&s, &a) - loss(&s, &b)) / (2.0 * eps);
            assert!(relative_error(dx.data()[idx], num) < 1e-4);
        }
    }
}
