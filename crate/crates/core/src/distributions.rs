//! Diagonal Gaussians and the class-conditional Gaussian mixture prior.
//!
//! Variances are always carried as log-variances. The free functions work
//! on plain values; [`ops`] has the batched, differentiable versions used
//! by the losses.

use std::f64::consts::PI;

use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mu.len() != log_var.len() {
            return Err(Error::Dimension {
                expected: mu.len(),
                got: log_var.len(),
            });
        }
        if mu.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional Gaussian".into()));
        }
        Ok(Self { mu, log_var })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn from_variance(mu: Vec<f64>, var: &[f64]) -> Result<Self> {
        Self::new(mu, var.iter().map(|v| v.ln()).collect())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|l| l.exp()).collect()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }
}

/// `log N(z; mu, diag(exp(log_var)))`.
pub fn gaussian_log_pdf(z: &[f64], g: &DiagGaussian) -> Result<f64> {
    g.check_dim(z.len())?;
    let quad: f64 = z
        .iter()
        .zip(&g.mu)
        .zip(&g.log_var)
        .map(|((&zi, &m), &lv)| lv + (zi - m).powi(2) * (-lv).exp())
        .sum();
    Ok(-0.5 * (g.dim() as f64 * LN_2PI + quad))
}

/// `KL(N(mu, sigma^2) || N(0, I))` in closed form.
pub fn kl_diag_gaussian_std(g: &DiagGaussian) -> f64 {
    0.5 * g
        .mu
        .iter()
        .zip(&g.log_var)
        .map(|(&m, &lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// `mu + exp(log_var / 2) * eps`.
pub fn reparameterize(g: &DiagGaussian, eps: &[f64]) -> Result<Vec<f64>> {
    g.check_dim(eps.len())?;
    Ok(g.mu
        .iter()
        .zip(&g.log_var)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// Mixture of diagonal Gaussians with fixed class priors.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    components: Vec<DiagGaussian>,
    priors: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<DiagGaussian>, priors: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if components.len() != priors.len() {
            return Err(Error::Dimension {
                expected: components.len(),
                got: priors.len(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: c.dim(),
            });
        }
        if priors.iter().any(|&p| !(p >= 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "class priors must be non-negative and sum to 1, got {priors:?}"
            )));
        }
        Ok(Self { components, priors })
    }

    /// Mixture with `p(c) = 1/C`.
    pub fn uniform(components: Vec<DiagGaussian>) -> Result<Self> {
        let c = components.len().max(1);
        Self::new(components, vec![1.0 / c as f64; c])
    }

    /// Builds the mixture from `C x d` tensors of means and log-variances.
    pub fn from_tensors(means: &Tensor, log_vars: &Tensor) -> Result<Self> {
        if means.shape() != log_vars.shape() {
            return Err(Error::Shape(format!(
                "means {:?} vs log-variances {:?}",
                means.shape(),
                log_vars.shape()
            )));
        }
        let comps = (0..means.rows())
            .map(|c| DiagGaussian::new(means.row_slice(c).to_vec(), log_vars.row_slice(c).to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(comps)
    }

    pub fn components(&self) -> &[DiagGaussian] {
        &self.components
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// `log p(c) + log N(z; mu_c, Sigma_c)` for every component.
    pub fn log_joint(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.components
            .iter()
            .zip(&self.priors)
            .map(|(g, &p)| Ok(p.ln() + gaussian_log_pdf(z, g)?))
            .collect()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log sum_c p(c) N(z; mu_c, Sigma_c)`.
pub fn mixture_log_pdf(z: &[f64], m: &GaussianMixture) -> Result<f64> {
    Ok(log_sum_exp(&m.log_joint(z)?))
}

/// Class posterior `q(c | z)` under the mixture, normalized in log space.
pub fn mixture_posterior(z: &[f64], m: &GaussianMixture) -> Result<Vec<f64>> {
    Ok(posterior_from_log_joint(&m.log_joint(z)?))
}

/// Softmax of unnormalized log-probabilities.
pub fn posterior_from_log_joint(log_joint: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_joint);
    let mut p: Vec<f64> = log_joint.iter().map(|l| (l - lse).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Moment-matched single Gaussian covering all components: the total mean
/// and the per-dimension total variance (within-class plus between-class).
pub fn mixture_total_moments(m: &GaussianMixture) -> DiagGaussian {
    let d = m.dim();
    let mut mean = vec![0.0; d];
    let mut second = vec![0.0; d];
    for (g, &p) in m.components.iter().zip(&m.priors) {
        for i in 0..d {
            mean[i] += p * g.mu[i];
            second[i] += p * (g.log_var[i].exp() + g.mu[i] * g.mu[i]);
        }
    }
    let log_var = (0..d).map(|i| (second[i] - mean[i] * mean[i]).ln()).collect();
    DiagGaussian { mu: mean, log_var }
}

/// Draws a class from the priors, then a point from that component.
pub fn sample_mixture(m: &GaussianMixture, rng: &mut SeededRng) -> (Vec<f64>, usize) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut class = m.n_components() - 1;
    for (c, &p) in m.priors.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            class = c;
            break;
        }
    }
    // skip trailing zero-prior classes when rounding pushes `u` past the sum
    while m.priors[class] == 0.0 && class > 0 {
        class -= 1;
    }
    let eps: Vec<f64> = (0..m.dim()).map(|_| rng.normal()).collect();
    let z = reparameterize(&m.components[class], &eps).expect("dimensions agree");
    (z, class)
}

/// Standard normal density, used by tests that build oracles from 1-D terms.
pub fn normal_pdf_1d(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Batched, differentiable versions over [`Graph`](crate::autodiff::Graph)
/// nodes. Rows are samples.
pub mod ops {
    use super::LN_2PI;
    use crate::autodiff::{Graph, Tensor, Var};
    use crate::error::Result;

    /// Row-wise `log N(z_i; mu_i, exp(log_var_i))`, `m x d -> m x 1`.
    pub fn log_pdf_rows(g: &mut Graph, z: Var, mu: Var, log_var: Var) -> Result<Var> {
        let d = g.value(z).cols() as f64;
        let diff = g.sub(z, mu)?;
        let sq = g.square(diff)?;
        let neg_lv = g.neg(log_var)?;
        let inv_var = g.exp(neg_lv)?;
        let scaled = g.mul(sq, inv_var)?;
        let terms = g.add(scaled, log_var)?;
        let s = g.sum_cols(terms)?;
        let half = g.scale(s, -0.5)?;
        g.add_scalar(half, -0.5 * d * LN_2PI)
    }

    /// Row-wise closed-form `KL(N(mu_i, sigma_i^2) || N(0, I))`, `m x 1`.
    pub fn kl_std_rows(g: &mut Graph, mu: Var, log_var: Var) -> Result<Var> {
        let var = g.exp(log_var)?;
        let mu2 = g.square(mu)?;
        let a = g.add(var, mu2)?;
        let b = g.sub(a, log_var)?;
        let c = g.add_scalar(b, -1.0)?;
        let s = g.sum_cols(c)?;
        g.scale(s, 0.5)
    }

    /// `mu + exp(log_var / 2) * eps`.
    pub fn reparameterize(g: &mut Graph, mu: Var, log_var: Var, eps: Var) -> Result<Var> {
        let half = g.scale(log_var, 0.5)?;
        let std = g.exp(half)?;
        let noise = g.mul(std, eps)?;
        g.add(mu, noise)
    }

    /// Rows of a `C x d` parameter matrix picked by a `m x C` one-hot (or
    /// any constant selector) matrix.
    pub fn select_rows(g: &mut Graph, selector: &Tensor, table: Var) -> Result<Var> {
        let s = g.input(selector.clone());
        g.matmul(s, table)
    }

    /// Mixture parameters as graph nodes: `means` and `log_vars` are `C x d`.
    #[derive(Clone, Debug)]
    pub struct MixtureVars {
        pub means: Var,
        pub log_vars: Var,
        pub log_priors: Vec<f64>,
    }

    impl MixtureVars {
        pub fn n_components(&self) -> usize {
            self.log_priors.len()
        }
    }

    /// `log p(c) + log N(z_i; mu_c, Sigma_c)` for all rows and components,
    /// `m x C`.
    pub fn mixture_log_joint(g: &mut Graph, z: Var, mix: &MixtureVars) -> Result<Var> {
        let rows = g.value(z).rows();
        let c_count = mix.n_components();
        let mut cols = Vec::with_capacity(c_count);
        for (c, &lp) in mix.log_priors.iter().enumerate() {
            let mut sel = Tensor::zeros(rows, c_count);
            for r in 0..rows {
                sel.set(r, c, 1.0);
            }
            let mu = select_rows(g, &sel, mix.means)?;
            let lv = select_rows(g, &sel, mix.log_vars)?;
            let lp_c = log_pdf_rows(g, z, mu, lv)?;
            cols.push(g.add_scalar(lp_c, lp)?);
        }
        g.concat_cols(&cols)
    }

    /// Row-wise `log p(z_i)` under the mixture, `m x 1`.
    pub fn mixture_log_pdf_rows(g: &mut Graph, z: Var, mix: &MixtureVars) -> Result<Var> {
        let joint = mixture_log_joint(g, z, mix)?;
        g.logsumexp_rows(joint)
    }

    /// Row-wise `log q(c | z_i)`, `m x C`.
    pub fn mixture_log_posterior(g: &mut Graph, z: Var, mix: &MixtureVars) -> Result<Var> {
        let joint = mixture_log_joint(g, z, mix)?;
        log_softmax_rows(g, joint)
    }

    /// Row-wise stable log-softmax, `m x C`.
    pub fn log_softmax_rows(g: &mut Graph, logits: Var) -> Result<Var> {
        let c = g.value(logits).cols();
        let lse = g.logsumexp_rows(logits)?;
        let lse_b = g.repeat_col(lse, c)?;
        g.sub(logits, lse_b)
    }
}
