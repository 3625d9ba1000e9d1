//! Central finite-difference gradient checks.

use std::collections::HashMap;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Compares an analytic gradient with central differences.
///
/// `f` returns the function value and its analytic gradient at the given
/// point. The result is `max_i |analytic_i - fd_i| / max(1, |analytic_i|)`.
pub fn finite_diff_check<F>(mut f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: FnMut(&Tensor) -> Result<(f64, Tensor)>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("finite-difference step must be > 0, got {h}")));
    }
    let (_, analytic) = f(x)?;
    if analytic.shape() != x.shape() {
        return Err(Error::Shape(format!(
            "gradient shape {:?} does not match point shape {:?}",
            analytic.shape(),
            x.shape()
        )));
    }
    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let (plus, _) = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let (minus, _) = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "function is not finite at coordinate {i} perturbed by {h}"
            )));
        }
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((a - fd).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

/// Finite-difference check of a recorded graph: every parameter leaf in
/// `params` is perturbed in turn and the graph re-evaluated.
pub fn check_graph(graph: &Graph, loss: Var, params: &[Var], h: f64) -> Result<f64> {
    let grads = graph.backward(loss)?;
    let mut worst: f64 = 0.0;
    for &p in params {
        let point = graph.value(p).clone();
        let analytic = grads.get(p).clone();
        let mut bindings = HashMap::new();
        let err = finite_diff_check(
            |t| {
                bindings.insert(p, t.clone());
                let vals = graph.evaluate(&bindings)?;
                Ok((vals[loss.id()].item(), analytic.clone()))
            },
            &point,
            h,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::scalar(3.0);
        let err = finite_diff_check(
            |t| {
                let v = t.item();
                Ok((v * v, Tensor::scalar(2.0 * v)))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = Tensor::scalar(1.0);
        let err = finite_diff_check(|t| Ok((t.item().powi(3), Tensor::scalar(1.0))), &x, 1e-5).unwrap();
        assert!((err - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_step_and_non_finite() {
        let x = Tensor::scalar(0.0);
        assert!(finite_diff_check(|t| Ok((t.item(), Tensor::scalar(1.0))), &x, 0.0).is_err());
        let r = finite_diff_check(|t| Ok((t.item().ln(), Tensor::scalar(1.0))), &x, 1e-3);
        assert!(r.is_err());
    }
}
