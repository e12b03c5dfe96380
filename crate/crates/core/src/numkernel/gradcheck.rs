//! Central-difference gradient checking.
//!
//! The relative error between an analytic derivative `a` and a numeric one
//! `n` is `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`. The floor keeps entries
//! whose true derivative is zero from reporting round-off noise as a huge
//! relative error.

use super::param::Parameterized;
use crate::error::{Error, Result};

pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub checked_entries: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares the gradients currently stored in `model`'s params against
/// central differences of `loss`.
///
/// `loss` must be a deterministic function of the parameter values; it is
/// evaluated twice at the unperturbed point and the check is rejected if the
/// two results differ in any bit.
pub fn grad_check<M, F>(model: &mut M, mut loss: F, epsilon: f64) -> Result<GradCheckReport>
where
    M: Parameterized,
    F: FnMut(&M) -> f64,
{
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::Config(format!(
            "gradient-check epsilon must lie in [1e-6, 1e-4], got {epsilon}"
        )));
    }
    let base = loss(model);
    let again = loss(model);
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministic(format!(
            "loss evaluated to {base} and then {again} at the same point"
        )));
    }

    let shapes: Vec<(String, usize)> = model.params().iter().map(|p| (p.name.clone(), p.value.len())).collect();
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut report = GradCheckReport {
        params: Vec::with_capacity(shapes.len()),
        checked_entries: 0,
    };
    for (k, (name, len)) in shapes.into_iter().enumerate() {
        let mut check = ParamCheck {
            name,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (j, &a) in analytic[k].iter().enumerate().take(len) {
            let orig = model.params()[k].value.data()[j];
            model.params_mut()[k].value.data_mut()[j] = orig + epsilon;
            let plus = loss(model);
            model.params_mut()[k].value.data_mut()[j] = orig - epsilon;
            let minus = loss(model);
            model.params_mut()[k].value.data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = relative_error(a, numeric);
            if err > check.max_rel_error || !err.is_finite() {
                check.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
                check.worst_index = j;
                check.analytic = a;
                check.numeric = numeric;
            }
            report.checked_entries += 1;
        }
        report.params.push(check);
    }
    Ok(report)
}
