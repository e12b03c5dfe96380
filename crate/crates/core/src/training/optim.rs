use crate::error::{Error, Result};
use crate::numkernel::{clip_elementwise, clip_global_norm, ClipMode, Matrix, Param};

use super::config::{OptimizerKind, TrainConfig};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam or SGD with decoupled weight decay:
/// `p ← p − lr · (update + weight_decay · p)`.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    clip: f64,
    clip_mode: ClipMode,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(config: &TrainConfig) -> Self {
        Optimizer {
            kind: config.optimizer,
            lr: config.lr,
            weight_decay: config.weight_decay,
            clip: config.clip,
            clip_mode: config.clip_mode,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Clips the gradients, then updates every parameter. Returns the
    /// gradient norm before clipping. The parameter list must keep the same
    /// order between calls.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<f64> {
        let norm = match self.clip_mode {
            ClipMode::GlobalNorm => clip_global_norm(params, self.clip)?,
            ClipMode::Elementwise => {
                let n = crate::numkernel::global_norm(params);
                clip_elementwise(params, self.clip)?;
                n
            }
        };
        if self.first.is_empty() {
            self.first = params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::Config("parameter list changed between optimizer steps".into()));
        }
        self.step += 1;
        let (lr, wd) = (self.lr, self.weight_decay);
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    let Param { value, grad, .. } = &mut **p;
                    for (w, g) in value.data_mut().iter_mut().zip(grad.data()) {
                        let mut u = *g;
                        if wd != 0.0 {
                            u += wd * *w;
                        }
                        *w -= lr * u;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let Param { value, grad, .. } = &mut **p;
                    for (((w, g), m), v) in value
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        let mut u = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                        if wd != 0.0 {
                            u += wd * *w;
                        }
                        *w -= lr * u;
                    }
                }
            }
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_run(config: &TrainConfig, steps: usize) -> Vec<f64> {
        let mut p = Param::new("w", Matrix::from_rows(&[[3.0, -2.0]]).unwrap());
        let mut opt = Optimizer::new(config);
        for _ in 0..steps {
            p.grad = p.value.scale(2.0);
            opt.step(&mut [&mut p]).unwrap();
        }
        p.value.into_data()
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let config = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let out = quadratic_run(&config, 1);
        assert!((out[0] - (3.0 - 0.001)).abs() < 1e-9);
        assert!((out[1] - (-2.0 + 0.001)).abs() < 1e-9);
    }

    #[test]
    fn zero_decay_matches_plain_adam() {
        let config = TrainConfig {
            weight_decay: 0.0,
            lr: 0.05,
            clip: 1e9,
            ..TrainConfig::default()
        };
        let got = quadratic_run(&config, 50);
        // Reference Adam written out independently.
        let mut w = [3.0f64, -2.0];
        let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        for t in 1..=50 {
            for i in 0..2 {
                let g = 2.0 * w[i];
                m[i] = 0.9 * m[i] + (1.0 - 0.9) * g;
                v[i] = 0.999 * v[i] + (1.0 - 0.999) * g * g;
                let mh = m[i] / (1.0 - 0.9f64.powi(t));
                let vh = v[i] / (1.0 - 0.999f64.powi(t));
                w[i] -= 0.05 * (mh / (vh.sqrt() + 1e-8));
            }
        }
        assert_eq!(got, w.to_vec());
    }

    #[test]
    fn decay_shrinks_weights_without_gradient() {
        let config = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 0.1,
            weight_decay: 0.5,
            ..TrainConfig::default()
        };
        let mut p = Param::new("w", Matrix::filled(1, 1, 2.0));
        Optimizer::new(&config).step(&mut [&mut p]).unwrap();
        assert!((p.value.get(0, 0) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn gradients_are_clipped() {
        let config = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 1.0,
            weight_decay: 0.0,
            clip: 5.0,
            ..TrainConfig::default()
        };
        let mut p = Param::new("w", Matrix::zeros(1, 2));
        p.grad = Matrix::from_rows(&[[30.0, 40.0]]).unwrap();
        let norm = Optimizer::new(&config).step(&mut [&mut p]).unwrap();
        assert_eq!(norm, 50.0);
        assert!((p.value.get(0, 0) + 3.0).abs() < 1e-12);
        assert!((p.value.get(0, 1) + 4.0).abs() < 1e-12);
    }
}
