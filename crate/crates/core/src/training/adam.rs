use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Moment estimates for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    /// Scales the learning rate of this group only.
    pub lr_multiplier: f64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self {
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
            step: 0,
            lr_multiplier: 1.0,
        }
    }
}

/// One bias-corrected Adam step, applied in place.
pub fn adam_update(
    group: &str,
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "group `{group}`: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "group `{group}`: gradient shape {:?} vs parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient(group.to_string()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.lr * state.lr_multiplier;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let (pd, gd) = (p.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
            vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
            let m_hat = md[i] / c1;
            let v_hat = vd[i] / c2;
            pd[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, beta1: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1,
            beta2: 0.9,
            eps: 1e-8,
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::row(&[1.0, -2.0]);
        let before = w.clone();
        let mut st = AdamState::new(&[&w]);
        adam_update("w", &mut [&mut w], &[Tensor::row(&[0.0, 0.0])], &mut st, &cfg(0.1, 0.0)).unwrap();
        assert_eq!(w, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // beta1 = 0: m = g = 1, v = (1 - b2), v_hat = 1, step = lr / (1 + eps)
        let mut w = Tensor::scalar(0.0);
        let mut st = AdamState::new(&[&w]);
        adam_update("w", &mut [&mut w], &[Tensor::scalar(1.0)], &mut st, &cfg(0.01, 0.0)).unwrap();
        assert!((w.item() + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut w = Tensor::scalar(0.0);
        let mut st = AdamState::new(&[&w]);
        let c = AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        for _ in 0..5000 {
            let g = Tensor::scalar(2.0 * (w.item() - 3.0));
            adam_update("w", &mut [&mut w], &[g], &mut st, &c).unwrap();
        }
        assert!((w.item() - 3.0).abs() < 1e-3, "{}", w.item());
    }

    #[test]
    fn rejects_non_finite_gradient_by_group() {
        let mut w = Tensor::scalar(0.0);
        let mut st = AdamState::new(&[&w]);
        let err = adam_update("decoder", &mut [&mut w], &[Tensor::scalar(f64::NAN)], &mut st, &cfg(0.1, 0.0))
            .unwrap_err();
        assert!(err.to_string().contains("decoder"));
        assert_eq!(st.step, 0);
    }

    #[test]
    fn multiplier_scales_step() {
        let mut a = Tensor::scalar(0.0);
        let mut b = Tensor::scalar(0.0);
        let mut sa = AdamState::new(&[&a]);
        let mut sb = AdamState::new(&[&b]);
        sb.lr_multiplier = 0.01;
        adam_update("a", &mut [&mut a], &[Tensor::scalar(1.0)], &mut sa, &cfg(0.1, 0.0)).unwrap();
        adam_update("b", &mut [&mut b], &[Tensor::scalar(1.0)], &mut sb, &cfg(0.1, 0.0)).unwrap();
        assert!((a.item() * 0.01 - b.item()).abs() < 1e-15);
    }
}
