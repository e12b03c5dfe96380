//! LSTM cell and bidirectional LSTM with backpropagation through time.
//!
//! One step over input `x` with previous state `(C, h)` and `u = [x, h]`:
//!
//! ```text
//! zi = σ(Wi·u + bi)    zf = σ(Wf·u + bf)    zo = σ(Wo·u + bo)
//! z  = tanh(Wc·u + bc)
//! C' = zf ⊙ C + zi ⊙ z
//! h' = zo ⊙ tanh(C')
//! ```

use crate::error::{Error, Result};
use crate::numkernel::{sigmoid_scalar, Matrix, Param, Parameterized, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Param,
    pub w_f: Param,
    pub w_o: Param,
    pub w_c: Param,
    pub b_i: Param,
    pub b_f: Param,
    pub b_o: Param,
    pub b_c: Param,
    input_dim: usize,
    hidden_dim: usize,
}

impl LstmParams {
    pub fn zeros(prefix: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let w = |g: &str| Param::zeros(format!("{prefix}.w_{g}"), hidden_dim, input_dim + hidden_dim);
        let b = |g: &str| Param::zeros(format!("{prefix}.b_{g}"), 1, hidden_dim);
        LstmParams {
            w_i: w("i"),
            w_f: w("f"),
            w_o: w("o"),
            w_c: w("c"),
            b_i: b("i"),
            b_f: b("f"),
            b_o: b("o"),
            b_c: b("c"),
            input_dim,
            hidden_dim,
        }
    }

    /// Glorot-uniform weights, zero biases except the forget-gate bias,
    /// which is set to `forget_bias`.
    pub fn init(prefix: &str, input_dim: usize, hidden_dim: usize, forget_bias: f64, rng: &mut Rng) -> Self {
        let mut p = LstmParams::zeros(prefix, input_dim, hidden_dim);
        let fan_in = input_dim + hidden_dim;
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_o, &mut p.w_c] {
            w.value = rng.glorot(hidden_dim, fan_in, fan_in, hidden_dim);
        }
        p.b_f.value.fill(forget_bias);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
}

impl Parameterized for LstmParams {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.b_i, &self.b_f, &self.b_o, &self.b_c,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub concat: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn affine(w: &Param, b: &Param, u: &[f64]) -> Vec<f64> {
    let mut z = w.value.matvec(u).expect("shape checked by caller");
    for (z, b) in z.iter_mut().zip(b.value.data()) {
        *z += b;
    }
    z
}

pub fn lstm_step_cached(x: &[f64], prev: &LstmState, params: &LstmParams) -> Result<(LstmState, StepCache)> {
    let hd = params.hidden_dim;
    if x.len() != params.input_dim || prev.h.len() != hd || prev.c.len() != hd {
        return Err(Error::Dimension {
            op: "lstm_step",
            left: (params.input_dim, hd),
            right: (x.len(), prev.h.len()),
        });
    }
    let mut concat = Vec::with_capacity(params.input_dim + hd);
    concat.extend_from_slice(x);
    concat.extend_from_slice(&prev.h);

    let gate_i: Vec<f64> = affine(&params.w_i, &params.b_i, &concat)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let gate_f: Vec<f64> = affine(&params.w_f, &params.b_f, &concat)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let gate_o: Vec<f64> = affine(&params.w_o, &params.b_o, &concat)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let candidate: Vec<f64> = affine(&params.w_c, &params.b_c, &concat)
        .into_iter()
        .map(f64::tanh)
        .collect();

    let c: Vec<f64> = (0..hd)
        .map(|k| gate_f[k] * prev.c[k] + gate_i[k] * candidate[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hd).map(|k| gate_o[k] * tanh_c[k]).collect();

    let state = LstmState { c: c.clone(), h };
    let cache = StepCache {
        concat,
        gate_i,
        gate_f,
        gate_o,
        candidate,
        c_prev: prev.c.clone(),
        c,
        tanh_c,
    };
    Ok((state, cache))
}

/// One LSTM step.
pub fn lstm_step(x: &[f64], prev: &LstmState, params: &LstmParams) -> Result<LstmState> {
    lstm_step_cached(x, prev, params).map(|(s, _)| s)
}

/// Backward through one step. Accumulates parameter gradients and returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    params: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = params.hidden_dim;
    let mut pre_i = vec![0.0; hd];
    let mut pre_f = vec![0.0; hd];
    let mut pre_o = vec![0.0; hd];
    let mut pre_c = vec![0.0; hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let (zi, zf, zo, z, tc) = (
            cache.gate_i[k],
            cache.gate_f[k],
            cache.gate_o[k],
            cache.candidate[k],
            cache.tanh_c[k],
        );
        pre_o[k] = dh[k] * tc * zo * (1.0 - zo);
        let dc_total = dc[k] + dh[k] * zo * (1.0 - tc * tc);
        pre_f[k] = dc_total * cache.c_prev[k] * zf * (1.0 - zf);
        pre_i[k] = dc_total * z * zi * (1.0 - zi);
        pre_c[k] = dc_total * zi * (1.0 - z * z);
        dc_prev[k] = dc_total * zf;
    }
    let mut dconcat = vec![0.0; cache.concat.len()];
    for (w, b, pre) in [
        (&mut params.w_i, &mut params.b_i, &pre_i),
        (&mut params.w_f, &mut params.b_f, &pre_f),
        (&mut params.w_o, &mut params.b_o, &pre_o),
        (&mut params.w_c, &mut params.b_c, &pre_c),
    ] {
        w.grad.add_outer(pre, &cache.concat);
        for (g, p) in b.grad.data_mut().iter_mut().zip(pre) {
            *g += p;
        }
        w.value.matvec_t_acc(pre, &mut dconcat);
    }
    let dh_prev = dconcat.split_off(params.input_dim);
    (dconcat, dh_prev, dc_prev)
}

/// Caches for one directional pass, in processing order.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    pub reversed: bool,
    pub steps: Vec<StepCache>,
}

/// Runs one direction from a zero state. Output rows are in the original
/// token order regardless of direction.
pub fn run_direction_cached(t: &Matrix, params: &LstmParams, reversed: bool) -> Result<(Matrix, DirectionCache)> {
    let n = t.rows();
    if t.cols() != params.input_dim {
        return Err(Error::Dimension {
            op: "run_direction",
            left: t.shape(),
            right: (params.input_dim, params.hidden_dim),
        });
    }
    let mut out = Matrix::zeros(n, params.hidden_dim);
    let mut state = LstmState::zeros(params.hidden_dim);
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        let pos = if reversed { n - 1 - k } else { k };
        let (next, cache) = lstm_step_cached(t.row(pos), &state, params)?;
        out.row_mut(pos).copy_from_slice(&next.h);
        steps.push(cache);
        state = next;
    }
    Ok((out, DirectionCache { reversed, steps }))
}

pub fn run_direction(t: &Matrix, params: &LstmParams, reversed: bool) -> Result<Matrix> {
    run_direction_cached(t, params, reversed).map(|(m, _)| m)
}

/// Backpropagation through time for one direction. `d_out` holds
/// `∂L/∂h` in original token order; returns `∂L/∂T`.
pub fn run_direction_backward(cache: &DirectionCache, d_out: &Matrix, params: &mut LstmParams) -> Matrix {
    let n = cache.steps.len();
    let hd = params.hidden_dim;
    let mut dt = Matrix::zeros(n, params.input_dim);
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for k in (0..n).rev() {
        let pos = if cache.reversed { n - 1 - k } else { k };
        let dh: Vec<f64> = d_out.row(pos).iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) = lstm_step_backward(&cache.steps[k], &dh, &dc_next, params);
        dt.row_mut(pos).copy_from_slice(&dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    dt
}

/// Forward and backward LSTMs whose states are concatenated per token.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: DirectionCache,
    bwd: DirectionCache,
}

impl BiLstm {
    pub fn init(input_dim: usize, hidden_dim: usize, forget_bias: f64, rng: &mut Rng) -> Self {
        BiLstm {
            forward: LstmParams::init("lstm.fwd", input_dim, hidden_dim, forget_bias, rng),
            backward: LstmParams::init("lstm.bwd", input_dim, hidden_dim, forget_bias, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden_dim + self.backward.hidden_dim
    }

    pub fn forward_cached(&self, t: &Matrix) -> Result<(Matrix, BiLstmCache)> {
        let (f, fwd) = run_direction_cached(t, &self.forward, false)?;
        let (b, bwd) = run_direction_cached(t, &self.backward, true)?;
        Ok((Matrix::hconcat(&[f, b])?, BiLstmCache { fwd, bwd }))
    }

    /// Accumulates gradients from `d_out` (`n × 2·hidden`) and returns `∂L/∂T`.
    pub fn backward(&mut self, cache: &BiLstmCache, d_out: &Matrix) -> Result<Matrix> {
        let hf = self.forward.hidden_dim;
        let df = d_out.slice_cols(0, hf);
        let db = d_out.slice_cols(hf, d_out.cols());
        let mut dt = run_direction_backward(&cache.fwd, &df, &mut self.forward);
        dt.add_assign(&run_direction_backward(&cache.bwd, &db, &mut self.backward))?;
        Ok(dt)
    }
}

/// Row `t` is `[forward state at t, backward state at t]`.
pub fn bilstm(t: &Matrix, fwd: &LstmParams, bwd: &LstmParams) -> Result<Matrix> {
    let f = run_direction(t, fwd, false)?;
    let b = run_direction(t, bwd, true)?;
    Matrix::hconcat(&[f, b])
}

impl Parameterized for BiLstm {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.forward.params();
        v.extend(self.backward.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.forward.params_mut();
        v.extend(self.backward.params_mut());
        v
    }
}
