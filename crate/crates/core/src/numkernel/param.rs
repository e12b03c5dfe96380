use super::Matrix;
use crate::error::{Error, Result};

/// A learnable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Param::new(name, Matrix::zeros(rows, cols))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }
}

/// Anything that owns a fixed, ordered list of parameters.
///
/// The order returned by `params` and `params_mut` must be identical; the
/// optimizer and checkpoint code rely on it.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

impl Parameterized for Vec<Param> {
    fn params(&self) -> Vec<&Param> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.iter_mut().collect()
    }
}

/// How gradients are bounded before an optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    GlobalNorm,
    Elementwise,
}

pub fn global_norm(params: &[&mut Param]) -> f64 {
    params.iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt()
}

/// Rescales all gradients jointly so their global L2 norm does not exceed
/// `threshold`. Returns the norm measured before clipping.
pub fn clip_global_norm(params: &mut [&mut Param], threshold: f64) -> Result<f64> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Config(format!("clip threshold must be > 0, got {threshold}")));
    }
    let norm = global_norm(params);
    if norm > threshold {
        let factor = threshold / norm;
        for p in params.iter_mut() {
            p.grad.scale_in_place(factor);
        }
    }
    Ok(norm)
}

/// Clamps each gradient entry into `[-threshold, threshold]`.
pub fn clip_elementwise(params: &mut [&mut Param], threshold: f64) -> Result<()> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Config(format!("clip threshold must be > 0, got {threshold}")));
    }
    for p in params.iter_mut() {
        for g in p.grad.data_mut() {
            *g = g.clamp(-threshold, threshold);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param_with_grad(grad: &[f64]) -> Param {
        let mut p = Param::zeros("g", 1, grad.len());
        p.grad = Matrix::row_vector(grad);
        p
    }

    #[test]
    fn below_threshold_is_unchanged() {
        let mut a = param_with_grad(&[3.0, 0.0]);
        let before = a.grad.clone();
        let norm = clip_global_norm(&mut [&mut a], 5.0).unwrap();
        assert_eq!(norm, 3.0);
        assert_eq!(a.grad, before);
    }

    #[test]
    fn single_grad_is_scaled_to_threshold() {
        let mut a = param_with_grad(&[10.0]);
        clip_global_norm(&mut [&mut a], 5.0).unwrap();
        assert_eq!(a.grad.data(), &[5.0]);
    }

    #[test]
    fn norm_spans_all_params() {
        let mut a = param_with_grad(&[6.0, 0.0]);
        let mut b = param_with_grad(&[8.0]);
        let mut ps = [&mut a, &mut b];
        let norm = clip_global_norm(&mut ps, 5.0).unwrap();
        assert_eq!(norm, 10.0);
        assert!(global_norm(&ps) <= 5.0 + 1e-9);
        assert_eq!(a.grad.data(), &[3.0, 0.0]);
        assert_eq!(b.grad.data(), &[4.0]);
    }

    #[test]
    fn nonpositive_threshold_rejected() {
        let mut a = param_with_grad(&[1.0]);
        assert!(clip_global_norm(&mut [&mut a], 0.0).is_err());
        assert!(clip_elementwise(&mut [&mut a], -1.0).is_err());
    }

    #[test]
    fn elementwise_clamps_each_entry() {
        let mut a = param_with_grad(&[-7.0, 2.0, 9.0]);
        clip_elementwise(&mut [&mut a], 5.0).unwrap();
        assert_eq!(a.grad.data(), &[-5.0, 2.0, 5.0]);
    }

    #[test]
    fn zero_grad_resets() {
        let mut a = param_with_grad(&[1.0, 2.0]);
        a.zero_grad();
        assert_eq!(a.grad.sum_squares(), 0.0);
        assert_eq!(a.grad.shape(), a.value.shape());
    }
}
