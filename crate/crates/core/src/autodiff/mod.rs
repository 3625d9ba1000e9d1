//! Dense tensors and a small reverse-mode differentiation engine.
//!
//! Graphs are built eagerly: every op computes its value when it is added,
//! so losses can be inspected as they are assembled. Only 2-D tensors flow
//! through a graph; broadcasting exists only for bias rows
//! ([`Graph::add_row`]), everything else is expressed with `matmul` against
//! constant ones.

mod check;
mod graph;
mod tensor;

pub use check::{check_graph, finite_diff_check};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
    }

    #[test]
    fn relu_forward() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[-1.0, 0.0, 2.0]));
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn matmul_shape_rule_and_error() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(2, 3));
        let b = g.input(Tensor::zeros(3, 1));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        let err = g.matmul(b, b).unwrap_err().to_string();
        assert!(err.contains("matmul"), "{err}");
        assert!(err.contains("node 3"), "{err}");
    }

    #[test]
    fn logsumexp_does_not_overflow() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[1000.0, 1000.0]));
        let y = g.logsumexp_rows(x).unwrap();
        // shifted-sum oracle with an arbitrary offset
        let offset = 997.25;
        let oracle = offset + ((1000.0f64 - offset).exp() * 2.0).ln();
        assert!((g.value(y).item() - oracle).abs() < 1e-12);
        assert!((g.value(y).item() - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(800.0));
        assert!(matches!(g.exp(x), Err(crate::Error::NonFinite { .. })));
    }

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::new();
        let w = g.param(Tensor::row(&[1.0, 2.0]));
        let s = g.square(w).unwrap();
        let l = g.sum(s).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(w).data(), &[2.0, 4.0]);
    }

    #[test]
    fn tanh_gradient_at_zero() {
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(0.0));
        let l = g.tanh(w).unwrap();
        assert_eq!(g.backward(l).unwrap().get(w).item(), 1.0);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(0.7));
        let y = g.add(x, x).unwrap();
        assert_eq!(g.backward(y).unwrap().get(x).item(), 2.0);
    }

    #[test]
    fn non_scalar_loss_and_detached_param() {
        let mut g = Graph::new();
        let x = g.param(Tensor::row(&[1.0, 2.0]));
        let detached = g.param(Tensor::row(&[5.0]));
        assert!(matches!(g.backward(x), Err(crate::Error::NonScalarLoss { .. })));
        let l = g.sum(x).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(detached).data(), &[0.0]);
    }

    #[test]
    fn evaluate_is_pure_and_rebinds() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[1.0, -2.0]));
        let w = g.param(Tensor::row(&[0.5, 0.25]));
        let m = g.mul(x, w).unwrap();
        let t = g.tanh(m).unwrap();
        let l = g.sum(t).unwrap();
        let b = HashMap::from([(x, Tensor::row(&[3.0, 4.0]))]);
        let a1 = g.evaluate(&b).unwrap();
        let a2 = g.evaluate(&b).unwrap();
        assert_eq!(a1, a2);
        let expect = (1.5f64).tanh() + (1.0f64).tanh();
        assert_eq!(a1[l.id()].item(), expect);
        // recorded values untouched
        assert_eq!(g.value(x).data(), &[1.0, -2.0]);
        g.rebind(&b).unwrap();
        assert_eq!(g.value(l).item(), expect);
    }

    /// Every differentiable op against central differences at 20 random points.
    #[test]
    fn every_op_matches_finite_differences() {
        type Build = fn(&mut Graph, Var, Var) -> crate::Result<Var>;
        let cases: Vec<(&str, Build, f64, f64)> = vec![
            ("matmul", |g, a, b| g.matmul(a, b), -1.0, 1.0),
            ("add", |g, a, _| { let t = g.tanh(a)?; g.add(a, t) }, -1.0, 1.0),
            ("add_row", |g, a, b| {
                let ones = g.input(Tensor::ones(1, 4));
                let row = g.matmul(ones, b)?;
                let t = g.add_row(a, row)?;
                g.square(t)
            }, -1.0, 1.0),
            ("mul", |g, a, _| g.mul(a, a), -1.0, 1.0),
            ("relu", |g, a, _| g.relu(a), -1.0, 1.0),
            ("tanh", |g, a, _| g.tanh(a), -2.0, 2.0),
            ("sigmoid", |g, a, _| g.sigmoid(a), -3.0, 3.0),
            ("exp", |g, a, _| g.exp(a), -1.0, 1.0),
            ("log", |g, a, _| g.log(a), 0.5, 2.0),
            ("neg", |g, a, _| g.neg(a), -1.0, 1.0),
            ("square", |g, a, _| g.square(a), -1.0, 1.0),
            ("scale", |g, a, _| g.scale(a, -1.7), -1.0, 1.0),
            ("add_scalar", |g, a, _| { let t = g.add_scalar(a, 0.3)?; g.square(t) }, -1.0, 1.0),
            ("mean", |g, a, _| { let t = g.square(a)?; g.mean(t) }, -1.0, 1.0),
            ("sum_cols", |g, a, _| { let t = g.sum_cols(a)?; g.square(t) }, -1.0, 1.0),
            ("logsumexp_rows", |g, a, _| { let t = g.logsumexp_rows(a)?; g.square(t) }, -3.0, 3.0),
            ("concat_cols", |g, a, b| { let t = g.tanh(a)?; let bt = g.matmul(a, b)?; let c = g.concat_cols(&[t, a, bt])?; g.square(c) }, -1.0, 1.0),
            ("slice_cols", |g, a, _| { let t = g.slice_cols(a, 1, 3)?; g.square(t) }, -1.0, 1.0),
            ("clamp", |g, a, _| { let t = g.clamp(a, -0.5, 0.5)?; g.square(t) }, -1.0, 1.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (name, build, lo, hi) in cases {
            for trial in 0..20 {
                let mut g = Graph::new();
                let a = g.param(rand_tensor(&mut rng, 3, 4, lo, hi));
                let b = g.param(rand_tensor(&mut rng, 4, 4, -1.0, 1.0));
                let out = build(&mut g, a, b).unwrap();
                // weight the output so every element contributes differently
                let shape = g.value(out).shape().to_vec();
                let weights = rand_tensor(&mut rng, shape[0], shape[1], 0.5, 1.5);
                let w = g.input(weights);
                let prod = g.mul(out, w).unwrap();
                let loss = g.sum(prod).unwrap();
                // keep relu/clamp probes away from their kinks
                let near_kink = matches!(name, "relu" | "clamp")
                    && g.value(a).data().iter().any(|v| v.abs() < 1e-3 || (v.abs() - 0.5).abs() < 1e-3);
                if near_kink {
                    continue;
                }
                let err = check_graph(&g, loss, &[a, b], 1e-5).unwrap();
                assert!(err < 1e-5, "{name} trial {trial}: rel err {err}");
            }
        }
    }
}
