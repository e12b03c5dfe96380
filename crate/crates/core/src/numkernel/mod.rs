//! Dense numeric primitives shared by every layer: matrices, stable
//! softmax/log-sum-exp, activations, parameters with gradient accumulators,
//! a seeded RNG, gradient clipping and a central-difference gradient checker.

mod gradcheck;
mod matrix;
mod ops;
mod param;
mod rng;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck, REL_ERR_FLOOR};
pub use matrix::{dot, matmul, Matrix};
pub use ops::{log_sum_exp, row_softmax, sigmoid, sigmoid_scalar, softmax_in_place, tanh};
pub use param::{clip_elementwise, clip_global_norm, global_norm, ClipMode, Param, Parameterized};
pub use rng::Rng;
