//! Central finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many evenly spaced entries of each parameter.
    pub max_entries_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            max_entries_per_param: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst: Option<Mismatch>,
    pub entries_checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn eval<F>(store: &ParamStore, loss_fn: &mut F) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamStore) -> Var,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store);
    let v: f64 = tape.value(loss).iter().sum();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss(v))
    }
}

fn sample(len: usize, max: Option<usize>) -> Vec<usize> {
    match max {
        Some(m) if m < len && m > 0 => (0..m).map(|i| i * len / m).collect(),
        _ => (0..len).collect(),
    }
}

/// Compares reverse-mode gradients of a scalar loss against central
/// differences for every trainable parameter entry, returning
/// `max |a - n| / max(|a|, |n|, 1e-6)`.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    mut loss_fn: F,
    options: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Var,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store);
    let base: f64 = tape.value(loss).iter().sum();
    if !base.is_finite() {
        return Err(Error::NonFiniteLoss(base));
    }
    tape.backward(loss);
    let grads = tape.param_grads(store);
    drop(tape);

    let h = options.step;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        entries_checked: 0,
        tolerance: options.tolerance,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).requires_grad {
            continue;
        }
        for idx in sample(store.get(id).len(), options.max_entries_per_param) {
            let orig = store.get(id).data()[idx];
            store.get_mut(id).data_mut()[idx] = orig + h;
            let up = eval(store, &mut loss_fn);
            store.get_mut(id).data_mut()[idx] = orig - h;
            let down = eval(store, &mut loss_fn);
            store.get_mut(id).data_mut()[idx] = orig;
            let numeric = (up? - down?) / (2.0 * h);
            let analytic = grads.get(id)[idx];
            let err = relative_error(analytic, numeric);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some(Mismatch {
                    param: store.name(id).to_string(),
                    index: idx,
                    analytic,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn linear_function_is_exact() {
        let mut store = ParamStore::new();
        let x = store.insert("x", Tensor::scalar(2.0)).unwrap();
        let report = check_gradients(
            &mut store,
            |tape, s| {
                let v = tape.param(s, x);
                tape.scale(v, 3.0)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-9, "{report:?}");
        assert_eq!(report.worst.unwrap().analytic, 3.0);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let mut store = ParamStore::new();
        let x = store.insert("x", Tensor::scalar(1.0)).unwrap();
        let res = check_gradients(
            &mut store,
            |tape, s| {
                let v = tape.param(s, x);
                tape.scale(v, f64::INFINITY)
            },
            &GradCheckOptions::default(),
        );
        assert!(matches!(res, Err(Error::NonFiniteLoss(_))));
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-7, 0.0) - 0.1).abs() < 1e-12);
        assert!((relative_error(2e-6, 1e-6) - 0.5).abs() < 1e-12);
    }
}
