//! Finite-difference check of the reverse-mode engine on a small network
//! feeding the mixture loss.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use disvae::autodiff::{check_graph, finite_diff_check};
use disvae::distributions::ops::MixtureVars;
use disvae::losses::gm_loss;
use disvae::models::{Activation, Mlp, MlpSpec, OutputHead};
use disvae::rng::SeededRng;
use disvae::{Graph, Tensor};

fn main() -> disvae::Result<()> {
    // A plain function first: f(x) = sum(x^3), f'(x) = 3x^2.
    let x = Tensor::row(&[0.3, -1.2, 2.0]);
    let err = finite_diff_check(
        |t| Ok((t.data().iter().map(|v| v * v * v).sum(), t.map(|v| 3.0 * v * v))),
        &x,
        1e-5,
    )?;
    println!("cubic: max rel err {err:.2e}");

    let mut rng = SeededRng::new(0);
    let enc = Mlp::new(
        MlpSpec {
            input_dim: 2,
            hidden_dims: vec![8, 8],
            output_dim: 2,
            hidden_activation: Activation::Tanh,
            output_head: OutputHead::Linear,
        },
        &mut rng,
    )?;
    let mut g = Graph::new();
    let xs = g.input(rng.normal_tensor(16, 2));
    let vars = enc.bind(&mut g);
    let z = enc.forward(&mut g, &vars, xs)?;
    let mix = MixtureVars {
        means: g.param(rng.normal_tensor(3, 2)),
        log_vars: g.param(Tensor::zeros(3, 2)),
        log_priors: vec![-(3f64).ln(); 3],
    };
    let labels: Vec<usize> = (0..16).map(|i| i % 3).collect();
    let loss = gm_loss(&mut g, z, &labels, &mix, 0.1)?;
    let mut params = vars.vars();
    params.extend([mix.means, mix.log_vars]);
    for (name, v) in [("l_cls", loss.cls), ("l_lkd", loss.lkd), ("l_gm", loss.gm)] {
        println!("{name} = {:.4}: max rel err {:.2e}", g.value(v).item(), check_graph(&g, v, &params, 1e-5)?);
    }
    Ok(())
}
