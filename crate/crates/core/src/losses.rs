//! Loss terms as scalar graph nodes. Every batch reduction is a mean.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::distributions::ops::{self, MixtureVars};
use crate::error::{Error, Result};
use crate::models::NetworkParams;
use crate::rng::SeededRng;

/// One value per loss term. Training reports epoch means of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rec: f64,
    pub l_kl: f64,
    pub l_lkd: f64,
    pub l_cls: f64,
    pub l_gm: f64,
    pub l_e_adv: f64,
    pub l_c_adv: f64,
    pub l_d_adv: f64,
    pub l_gd_adv: f64,
    /// `-(l_rec + l_kl + l_lkd)`: the three ELBO terms with the additive
    /// constants of the Gaussian likelihoods dropped.
    pub elbo_estimate: f64,
}

impl LossBreakdown {
    pub const FIELDS: [&'static str; 10] = [
        "l_rec",
        "l_kl",
        "l_lkd",
        "l_cls",
        "l_gm",
        "l_e_adv",
        "l_c_adv",
        "l_d_adv",
        "l_gd_adv",
        "elbo_estimate",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.l_rec,
            self.l_kl,
            self.l_lkd,
            self.l_cls,
            self.l_gm,
            self.l_e_adv,
            self.l_c_adv,
            self.l_d_adv,
            self.l_gd_adv,
            self.elbo_estimate,
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != 10 {
            return None;
        }
        Some(Self {
            l_rec: v[0],
            l_kl: v[1],
            l_lkd: v[2],
            l_cls: v[3],
            l_gm: v[4],
            l_e_adv: v[5],
            l_c_adv: v[6],
            l_d_adv: v[7],
            l_gd_adv: v[8],
            elbo_estimate: v[9],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub(crate) fn with_elbo(mut self) -> Self {
        self.elbo_estimate = -(self.l_rec + self.l_kl + self.l_lkd);
        self
    }

    /// Element-wise accumulate, for running means.
    pub(crate) fn accumulate(&mut self, other: &Self, weight: f64) {
        let mut v = self.values();
        for (a, b) in v.iter_mut().zip(other.values()) {
            *a += weight * b;
        }
        *self = Self::from_values(&v).expect("ten fields");
    }
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= classes) {
        Some(&y) => Err(Error::LabelOutOfRange {
            label: y as i64,
            classes,
        }),
        None => Ok(()),
    }
}

/// Batch mean of `1/2 ||x - x'||^2`.
pub fn rec_loss(g: &mut Graph, x: Var, x_rec: Var) -> Result<Var> {
    let diff = g.sub(x, x_rec)?;
    let sq = g.square(diff)?;
    let per_row = g.sum_cols(sq)?;
    let m = g.mean(per_row)?;
    g.scale(m, 0.5)
}

/// Batch mean of `-log N(z_i; mu_i, Sigma_i)` with per-row parameters.
pub fn neg_log_likelihood(g: &mut Graph, z: Var, mu: Var, log_var: Var) -> Result<Var> {
    let lp = ops::log_pdf_rows(g, z, mu, log_var)?;
    let m = g.mean(lp)?;
    g.neg(m)
}

#[derive(Clone, Copy, Debug)]
pub struct GmLoss {
    pub cls: Var,
    pub lkd: Var,
    pub gm: Var,
}

/// Mixture classification loss, likelihood regularizer and their weighted
/// sum, differentiable in `z_s` and the mixture parameters.
pub fn gm_loss(g: &mut Graph, z_s: Var, labels: &[usize], mix: &MixtureVars, lambda_lkd: f64) -> Result<GmLoss> {
    let classes = mix.n_components();
    check_labels(labels, classes)?;
    if labels.len() != g.value(z_s).rows() {
        return Err(Error::Dimension {
            expected: g.value(z_s).rows(),
            got: labels.len(),
        });
    }
    let onehot = Tensor::one_hot(labels, classes)?;

    let log_post = ops::mixture_log_posterior(g, z_s, mix)?;
    let y = g.input(onehot.clone());
    let picked = g.mul(log_post, y)?;
    let per_row = g.sum_cols(picked)?;
    let mean = g.mean(per_row)?;
    let cls = g.neg(mean)?;

    let mu_y = ops::select_rows(g, &onehot, mix.means)?;
    let lv_y = ops::select_rows(g, &onehot, mix.log_vars)?;
    let lkd = neg_log_likelihood(g, z_s, mu_y, lv_y)?;

    let weighted = g.scale(lkd, lambda_lkd)?;
    let gm = g.add(cls, weighted)?;
    Ok(GmLoss { cls, lkd, gm })
}

/// `(L_C, L_E)`: cross entropy of the latent classifier against the labels,
/// and against the uniform distribution over classes.
pub fn adv_classifier_losses(g: &mut Graph, logits: Var, labels: &[usize], classes: usize) -> Result<(Var, Var)> {
    check_labels(labels, classes)?;
    if g.value(logits).cols() != classes {
        return Err(Error::Dimension {
            expected: classes,
            got: g.value(logits).cols(),
        });
    }
    let ls = ops::log_softmax_rows(g, logits)?;
    let y = g.input(Tensor::one_hot(labels, classes)?);
    let picked = g.mul(ls, y)?;
    let per_row = g.sum_cols(picked)?;
    let mean = g.mean(per_row)?;
    let c_adv = g.neg(mean)?;

    let all = g.sum_cols(ls)?;
    let mean_all = g.mean(all)?;
    let e_adv = g.scale(mean_all, -1.0 / classes as f64)?;
    Ok((c_adv, e_adv))
}

fn neg_log(g: &mut Graph, p: Var) -> Result<Var> {
    let l = g.log(p)?;
    g.neg(l)
}

fn neg_log_one_minus(g: &mut Graph, p: Var) -> Result<Var> {
    let n = g.neg(p)?;
    let q = g.add_scalar(n, 1.0)?;
    neg_log(g, q)
}

/// `(L_D, L_GD)` for a real batch, reconstructions and prior samples.
/// Inputs are clamped discriminator probabilities.
pub fn gan_losses(g: &mut Graph, d_real: Var, d_fake_rec: Var, d_fake_prior: Var) -> Result<(Var, Var)> {
    let a = neg_log(g, d_real)?;
    let b = neg_log_one_minus(g, d_fake_rec)?;
    let c = neg_log_one_minus(g, d_fake_prior)?;
    let ab = g.add(a, b)?;
    let abc = g.add(ab, c)?;
    let d_adv = g.mean(abc)?;

    let e = neg_log(g, d_fake_rec)?;
    let f = neg_log(g, d_fake_prior)?;
    let ef = g.add(e, f)?;
    let gd_adv = g.mean(ef)?;
    Ok((d_adv, gd_adv))
}

/// Monte Carlo report of every loss term on a labeled batch.
#[derive(Clone, Debug)]
pub struct ElboReport {
    pub breakdown: LossBreakdown,
    pub n_mc: usize,
    /// Variance of a single-draw estimate of `l_rec` due to sampling `z_u`
    /// (mean within-sample variance over draws, divided by the batch
    /// size). Needs `n_mc >= 2`.
    pub rec_draw_variance: Option<f64>,
}

impl ElboReport {
    /// Monte Carlo standard error of `l_rec` for `n` draws.
    pub fn rec_std_error(&self, n: usize) -> Option<f64> {
        self.rec_draw_variance.map(|v| (v / n as f64).sqrt())
    }
}

/// Estimates the ELBO terms: `l_rec` averaged over `n_mc` draws of `z_u`,
/// exact `l_kl`, and the likelihood term of `z_s` under its class
/// component. The remaining fields are filled with the same batch.
pub fn elbo_report(
    x: &Tensor,
    params: &NetworkParams,
    labels: &[usize],
    lambda_lkd: f64,
    rng: &mut SeededRng,
    n_mc: usize,
) -> Result<ElboReport> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be >= 1".into()));
    }
    let n = x.rows();
    let classes = params.classes();
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let enc_u = params.enc_u.bind(&mut g);
    let (mu, lv) = params.enc_u.forward_pair(&mut g, &enc_u, xv)?;
    let kl_rows = ops::kl_std_rows(&mut g, mu, lv)?;
    let l_kl = g.mean(kl_rows)?;
    let enc_s = params.enc_s.bind(&mut g);
    let z_s = params.enc_s.forward(&mut g, &enc_s, xv)?;
    let mix = params.mixture.bind(&mut g);
    let gm = gm_loss(&mut g, z_s, labels, &mix, lambda_lkd)?;

    let dec = params.decoder.bind(&mut g);
    let cls = params.adv_classifier.bind(&mut g);
    let disc = params.discriminator.bind(&mut g);
    let mut per_sample = vec![Vec::with_capacity(n_mc); n];
    let mut sums = LossBreakdown::default();
    let mixture = params.mixture.to_mixture();
    for _ in 0..n_mc {
        let eps = g.input(rng.normal_tensor(n, params.dim_z_u()));
        let z_u = ops::reparameterize(&mut g, mu, lv, eps)?;
        let codes = g.concat_cols(&[z_s, z_u])?;
        let x_rec = params.decoder.forward(&mut g, &dec, codes)?;
        let diff = g.sub(xv, x_rec)?;
        let sq = g.square(diff)?;
        let rows = g.sum_cols(sq)?;
        for (i, v) in g.value(rows).data().iter().enumerate() {
            per_sample[i].push(0.5 * v);
        }
        let logits = params.adv_classifier.forward(&mut g, &cls, z_u)?;
        let (c_adv, e_adv) = adv_classifier_losses(&mut g, logits, labels, classes)?;

        let (zs_p, zu_p) = sample_prior_codes(&mixture, labels, params.dim_z_u(), rng);
        let zs_p = g.input(zs_p);
        let zu_p = g.input(zu_p);
        let codes_p = g.concat_cols(&[zs_p, zu_p])?;
        let x_p = params.decoder.forward(&mut g, &dec, codes_p)?;
        let (d_adv, gd_adv) = discriminate(&mut g, params, &disc, xv, x_rec, x_p, labels, labels)?;

        sums.l_c_adv += g.value(c_adv).item();
        sums.l_e_adv += g.value(e_adv).item();
        sums.l_d_adv += g.value(d_adv).item();
        sums.l_gd_adv += g.value(gd_adv).item();
    }
    let k = n_mc as f64;
    let l_rec = per_sample.iter().flatten().sum::<f64>() / (n as f64 * k);
    let rec_draw_variance = (n_mc >= 2).then(|| {
        let within: f64 = per_sample
            .iter()
            .map(|draws| {
                let m = draws.iter().sum::<f64>() / k;
                draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0)
            })
            .sum();
        within / (n as f64 * n as f64)
    });
    let breakdown = LossBreakdown {
        l_rec,
        l_kl: g.value(l_kl).item(),
        l_lkd: g.value(gm.lkd).item(),
        l_cls: g.value(gm.cls).item(),
        l_gm: g.value(gm.gm).item(),
        l_e_adv: sums.l_e_adv / k,
        l_c_adv: sums.l_c_adv / k,
        l_d_adv: sums.l_d_adv / k,
        l_gd_adv: sums.l_gd_adv / k,
        elbo_estimate: 0.0,
    }
    .with_elbo();
    Ok(ElboReport {
        breakdown,
        n_mc,
        rec_draw_variance,
    })
}

/// `z_s ~ N(mu_y, Sigma_y)` per label and `z_u ~ N(0, I)`.
pub(crate) fn sample_prior_codes(
    mixture: &crate::distributions::GaussianMixture,
    labels: &[usize],
    dim_z_u: usize,
    rng: &mut SeededRng,
) -> (Tensor, Tensor) {
    let d = mixture.dim();
    let mut zs = Vec::with_capacity(labels.len() * d);
    for &y in labels {
        let comp = &mixture.components()[y];
        let eps: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        zs.extend(crate::distributions::reparameterize(comp, &eps).expect("dims agree"));
    }
    let zu = rng.normal_tensor(labels.len(), dim_z_u);
    (Tensor::from_vec(labels.len(), d, zs), zu)
}

/// Runs the discriminator on real, reconstructed and prior-sampled batches
/// and returns `(L_D, L_GD)`. `prior_labels` condition the prior samples.
#[allow(clippy::too_many_arguments)]
pub(crate) fn discriminate(
    g: &mut Graph,
    params: &NetworkParams,
    disc: &crate::models::MlpVars,
    x: Var,
    x_rec: Var,
    x_prior: Var,
    labels: &[usize],
    prior_labels: &[usize],
) -> Result<(Var, Var)> {
    let classes = params.classes();
    let onehot = g.input(Tensor::one_hot(labels, classes)?);
    let onehot_p = g.input(Tensor::one_hot(prior_labels, classes)?);
    let real_in = g.concat_cols(&[x, onehot])?;
    let rec_in = g.concat_cols(&[x_rec, onehot])?;
    let prior_in = g.concat_cols(&[x_prior, onehot_p])?;
    let d_real = params.discriminator.forward(g, disc, real_in)?;
    let d_rec = params.discriminator.forward(g, disc, rec_in)?;
    let d_prior = params.discriminator.forward(g, disc, prior_in)?;
    gan_losses(g, d_real, d_rec, d_prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check_graph;
    use crate::distributions::{gaussian_log_pdf, mixture_posterior, DiagGaussian, GaussianMixture};
    use crate::models::build_networks;
    use crate::training::TrainConfig;
    use rand::Rng;

    fn scalar(g: &Graph, v: Var) -> f64 {
        g.value(v).item()
    }

    #[test]
    fn rec_loss_examples() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[0.0, 0.0]));
        let xr = g.input(Tensor::row(&[3.0, 4.0]));
        let l = rec_loss(&mut g, x, xr).unwrap();
        assert_eq!(scalar(&g, l), 12.5);
        let l0 = rec_loss(&mut g, x, x).unwrap();
        assert_eq!(scalar(&g, l0), 0.0);

        let mut rng = SeededRng::new(1);
        let a = rng.normal_tensor(7, 3);
        let b = rng.normal_tensor(7, 3);
        let mut oracle = 0.0;
        for i in 0..7 {
            for j in 0..3 {
                oracle += 0.5 * (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        oracle /= 7.0;
        let mut g = Graph::new();
        let (av, bv) = (g.input(a), g.input(b));
        let l = rec_loss(&mut g, av, bv).unwrap();
        assert!((scalar(&g, l) - oracle).abs() < 1e-13);

        let c = g.input(Tensor::zeros(7, 2));
        assert!(rec_loss(&mut g, av, c).is_err());
    }

    fn mixture_graph(g: &mut Graph, m: &GaussianMixture) -> MixtureVars {
        let mu: Vec<Vec<f64>> = m.components().iter().map(|c| c.mu.clone()).collect();
        let lv: Vec<Vec<f64>> = m.components().iter().map(|c| c.log_var.clone()).collect();
        MixtureVars {
            means: g.param(Tensor::from_rows(&mu)),
            log_vars: g.param(Tensor::from_rows(&lv)),
            log_priors: m.priors().iter().map(|p| p.ln()).collect(),
        }
    }

    #[test]
    fn gm_loss_symmetric_point_and_mode() {
        // three unit components on a circle, z at the center
        let comps = (0..3)
            .map(|c| {
                let t = 2.0 * std::f64::consts::PI * c as f64 / 3.0;
                DiagGaussian::new(vec![t.cos(), t.sin()], vec![0.0, 0.0]).unwrap()
            })
            .collect();
        let m = GaussianMixture::uniform(comps).unwrap();
        let mut g = Graph::new();
        let mix = mixture_graph(&mut g, &m);
        let z = g.param(Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]));
        let l = gm_loss(&mut g, z, &[0, 2], &mix, 0.1).unwrap();
        assert!((scalar(&g, l.cls) - 3f64.ln()).abs() < 1e-14);

        let z = g.param(Tensor::row(&m.components()[1].mu));
        let l = gm_loss(&mut g, z, &[1], &mix, 0.1).unwrap();
        assert!((scalar(&g, l.lkd) - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        assert_eq!(scalar(&g, l.gm) - (scalar(&g, l.cls) + 0.1 * scalar(&g, l.lkd)), 0.0);

        assert!(gm_loss(&mut g, z, &[3], &mix, 0.1).is_err());
    }

    #[test]
    fn gm_loss_matches_bayes_oracle_and_gradients() {
        let mut rng = SeededRng::new(2);
        for _ in 0..10 {
            let comps = (0..3)
                .map(|_| {
                    DiagGaussian::new(
                        (0..2).map(|_| rng.random_range(-2.0..2.0)).collect(),
                        (0..2).map(|_| rng.random_range(-0.5..0.5)).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let m = GaussianMixture::uniform(comps).unwrap();
            let z = rng.normal_tensor(6, 2);
            let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
            let mut g = Graph::new();
            let mix = mixture_graph(&mut g, &m);
            let zv = g.param(z.clone());
            let l = gm_loss(&mut g, zv, &labels, &mix, 0.1).unwrap();

            // linear-space Bayes rule and explicit log density
            let mut cls = 0.0;
            let mut lkd = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let zi = z.row_slice(i);
                let dens: Vec<f64> = m
                    .components()
                    .iter()
                    .map(|c| gaussian_log_pdf(zi, c).unwrap().exp())
                    .collect();
                cls -= (dens[y] / dens.iter().sum::<f64>()).ln();
                lkd -= gaussian_log_pdf(zi, &m.components()[y]).unwrap();
                assert!((mixture_posterior(zi, &m).unwrap()[y] - dens[y] / dens.iter().sum::<f64>()).abs() < 1e-12);
            }
            assert!((scalar(&g, l.cls) - cls / 6.0).abs() < 1e-12);
            assert!((scalar(&g, l.lkd) - lkd / 6.0).abs() < 1e-12);
            for loss in [l.cls, l.lkd, l.gm] {
                let err = check_graph(&g, loss, &[zv, mix.means, mix.log_vars], 1e-5).unwrap();
                assert!(err < 1e-5, "{err}");
            }
        }
    }

    #[test]
    fn classification_loss_invariant_to_common_density_scaling() {
        // scaling every component density by k adds ln k to every log joint
        let mut g = Graph::new();
        let joint = g.param(Tensor::from_rows(&[vec![-1.0, -2.5, -0.3], vec![-4.0, -1.0, -2.0]]));
        let shifted = g.add_scalar(joint, 37.0).unwrap();
        let (a, _) = adv_classifier_losses(&mut g, joint, &[2, 0], 3).unwrap();
        let (b, _) = adv_classifier_losses(&mut g, shifted, &[2, 0], 3).unwrap();
        assert!((scalar(&g, a) - scalar(&g, b)).abs() < 1e-13);
    }

    #[test]
    fn adv_losses_examples() {
        let mut g = Graph::new();
        let logits = g.param(Tensor::zeros(4, 3));
        let (c, e) = adv_classifier_losses(&mut g, logits, &[0, 1, 2, 1], 3).unwrap();
        assert!((scalar(&g, c) - 3f64.ln()).abs() < 1e-15);
        assert!((scalar(&g, e) - 3f64.ln()).abs() < 1e-15);

        let peaked = g.param(Tensor::from_rows(&[vec![0.0, 20.0, 0.0]]));
        let (c, _) = adv_classifier_losses(&mut g, peaked, &[1], 3).unwrap();
        let exact = (1.0 + 2.0 * (-20f64).exp()).ln();
        assert!(scalar(&g, c) < 1e-8);
        // logsumexp shifts by the max logit, so rounding is relative to 20
        assert!((scalar(&g, c) - exact).abs() < 1e-13);

        assert!(adv_classifier_losses(&mut g, logits, &[0, 1, 2, 3], 3).is_err());
    }

    #[test]
    fn adv_losses_gradients() {
        let mut rng = SeededRng::new(3);
        for _ in 0..10 {
            let mut g = Graph::new();
            let logits = g.param(rng.normal_tensor(5, 3).map(|v| 2.0 * v));
            let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            let (c, e) = adv_classifier_losses(&mut g, logits, &labels, 3).unwrap();
            for l in [c, e] {
                assert!(check_graph(&g, l, &[logits], 1e-5).unwrap() < 1e-5);
            }
        }
    }

    #[test]
    fn uniform_target_loss_is_minimized_at_uniform_softmax() {
        // gradient descent on the logits lands on the uniform distribution
        let mut rng = SeededRng::new(4);
        let mut logits = rng.normal_tensor(1, 4).map(|v| 3.0 * v);
        for _ in 0..3000 {
            let mut g = Graph::new();
            let lv = g.param(logits.clone());
            let (_, e) = adv_classifier_losses(&mut g, lv, &[0], 4).unwrap();
            let grad = g.backward(e).unwrap().get(lv).clone();
            logits = logits.zip_map(&grad, |w, d| w - 0.5 * d);
        }
        let m = logits.data().iter().copied().fold(f64::MIN, f64::max);
        let p: Vec<f64> = logits.data().iter().map(|v| (v - m).exp()).collect();
        let s: f64 = p.iter().sum();
        for pi in p {
            assert!((pi / s - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn gan_loss_examples() {
        let mut g = Graph::new();
        let half = g.input(Tensor::full(3, 1, 0.5));
        let (d, gd) = gan_losses(&mut g, half, half, half).unwrap();
        assert!((scalar(&g, d) - 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!((scalar(&g, gd) - 2.0 * 2f64.ln()).abs() < 1e-15);

        let hi = g.input(Tensor::full(2, 1, 1.0 - 1e-7));
        let lo = g.input(Tensor::full(2, 1, 1e-7));
        let (d, _) = gan_losses(&mut g, hi, lo, lo).unwrap();
        assert!(scalar(&g, d) < 4e-7);

        let mut rng = SeededRng::new(5);
        let draw = |rng: &mut SeededRng| Tensor::from_vec(4, 1, (0..4).map(|_| rng.random_range(0.05..0.95)).collect());
        let (r, f, p) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let mut od = 0.0;
        let mut og = 0.0;
        for i in 0..4 {
            od += -r.data()[i].ln() - (1.0 - f.data()[i]).ln() - (1.0 - p.data()[i]).ln();
            og += -f.data()[i].ln() - p.data()[i].ln();
        }
        let mut g = Graph::new();
        let (rv, fv, pv) = (g.param(r), g.param(f), g.param(p));
        let (d, gd) = gan_losses(&mut g, rv, fv, pv).unwrap();
        assert!((scalar(&g, d) - od / 4.0).abs() < 1e-13);
        assert!((scalar(&g, gd) - og / 4.0).abs() < 1e-13);
        for l in [d, gd] {
            assert!(check_graph(&g, l, &[rv, fv, pv], 1e-6).unwrap() < 1e-5);
        }
    }

    #[test]
    fn elbo_report_mc_agreement_and_zero_kl() {
        let cfg = TrainConfig::toy();
        let mut params = build_networks(&cfg, &mut SeededRng::new(1)).unwrap();
        let mut rng = SeededRng::new(2);
        let x = rng.normal_tensor(32, 2);
        let labels: Vec<usize> = (0..32).map(|i| i % 3).collect();
        let one = elbo_report(&x, &params, &labels, 0.1, &mut rng, 1).unwrap();
        let many = elbo_report(&x, &params, &labels, 0.1, &mut rng, 64).unwrap();
        assert!(one.rec_draw_variance.is_none());
        let se = (many.rec_std_error(1).unwrap().powi(2) + many.rec_std_error(64).unwrap().powi(2)).sqrt();
        assert!((one.breakdown.l_rec - many.breakdown.l_rec).abs() < 3.0 * se);
        assert_eq!(one.breakdown.l_kl, many.breakdown.l_kl);
        assert!(one.breakdown.is_finite());
        let b = one.breakdown;
        assert_eq!(b.elbo_estimate, -(b.l_rec + b.l_kl + b.l_lkd));

        // force mu = 0, log_var = 0 by zeroing the last encoder layer
        let last = params.enc_u.layers.last_mut().unwrap();
        last.weight = last.weight.zeros_like();
        last.bias = last.bias.zeros_like();
        let r = elbo_report(&x, &params, &labels, 0.1, &mut rng, 2).unwrap();
        assert_eq!(r.breakdown.l_kl, 0.0);
        assert!(elbo_report(&x, &params, &labels, 0.1, &mut rng, 0).is_err());
    }
}
