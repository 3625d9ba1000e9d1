//! The class-conditional Gaussian mixture on `z_s`: posterior, sampling and
//! the moment-matched single Gaussian used for unlabeled data.
//!
//! ```text
//! cargo run --example mixture_prior
//! ```

use disvae::distributions::{
    kl_diag_gaussian_std, mixture_log_pdf, mixture_posterior, mixture_total_moments, sample_mixture, DiagGaussian,
    GaussianMixture,
};
use disvae::rng::SeededRng;

fn main() -> disvae::Result<()> {
    let m = GaussianMixture::uniform(vec![
        DiagGaussian::new(vec![-2.0, 0.0], vec![0.0, -1.0])?,
        DiagGaussian::new(vec![0.0, 1.5], vec![-1.0, 0.0])?,
        DiagGaussian::new(vec![2.0, 0.0], vec![0.5, -0.5])?,
    ])?;
    for z in [[-2.0, 0.0], [0.0, 0.7], [30.0, 30.0]] {
        let p = mixture_posterior(&z, &m)?;
        println!(
            "z = {z:?}: log p(z) = {:.3}, q(c|z) = [{:.3}, {:.3}, {:.3}]",
            mixture_log_pdf(&z, &m)?,
            p[0],
            p[1],
            p[2]
        );
    }

    let total = mixture_total_moments(&m);
    let mut rng = SeededRng::new(1);
    let n = 200_000;
    let mut mean = [0.0; 2];
    let mut sq = [0.0; 2];
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let (z, c) = sample_mixture(&m, &mut rng);
        counts[c] += 1;
        for k in 0..2 {
            mean[k] += z[k] / n as f64;
            sq[k] += z[k] * z[k] / n as f64;
        }
    }
    let var = total.variance();
    for k in 0..2 {
        println!(
            "dim {k}: total mean {:.3} (sampled {:.3}), total var {:.3} (sampled {:.3})",
            total.mu[k],
            mean[k],
            var[k],
            sq[k] - mean[k] * mean[k]
        );
    }
    println!("component counts {counts:?}");
    println!("KL(N(mu_t, Sigma_t) || N(0, I)) = {:.4}", kl_diag_gaussian_std(&total));
    Ok(())
}
