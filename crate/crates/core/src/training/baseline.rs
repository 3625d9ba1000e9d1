//! Conditional VAE-GAN without a latent split: the label is fed to the
//! encoder and decoder as a one-hot vector, and the prior is `N(0, I)` on
//! the whole code.

use crate::autodiff::{Graph, Tensor};
use crate::data::Batch;
use crate::distributions::ops;
use crate::error::{Error, Result};
use crate::losses::{self, LossBreakdown};
use crate::models::{decoder_spec, discriminator_spec, encoder_spec, Mlp, OutputHead};
use crate::rng::SeededRng;

use super::{adam_config, adam_update, AdamState, Optimizers, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParams {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub discriminator: Mlp,
    pub classes: usize,
    pub dim_z: usize,
}

pub fn build_baseline(config: &TrainConfig, rng: &mut SeededRng) -> Result<BaselineParams> {
    config.validate()?;
    let dim_z = config.dim_z_s + config.dim_z_u;
    let c = config.classes;
    Ok(BaselineParams {
        encoder: Mlp::new(
            encoder_spec(config, config.data_dim + c, dim_z, OutputHead::GaussianPair),
            rng,
        )?,
        decoder: Mlp::new(decoder_spec(config, dim_z + c), rng)?,
        discriminator: Mlp::new(discriminator_spec(config), rng)?,
        classes: c,
        dim_z,
    })
}

const GROUPS: [&str; 3] = ["encoder", "decoder", "discriminator"];

impl BaselineParams {
    fn mlp(&self, name: &str) -> &Mlp {
        match name {
            "encoder" => &self.encoder,
            "decoder" => &self.decoder,
            _ => &self.discriminator,
        }
    }

    fn mlp_mut(&mut self, name: &str) -> &mut Mlp {
        match name {
            "encoder" => &mut self.encoder,
            "decoder" => &mut self.decoder,
            _ => &mut self.discriminator,
        }
    }

    pub fn init_optimizers(&self) -> Optimizers {
        GROUPS
            .iter()
            .map(|&n| (n.to_string(), AdamState::new(&self.mlp(n).tensors())))
            .collect()
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for n in GROUPS {
            for (i, t) in self.mlp(n).tensors().into_iter().enumerate() {
                out.push((format!("{n}.{}.{}", i / 2, if i % 2 == 0 { "weight" } else { "bias" }), t));
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        // split borrows field by field
        let Self {
            encoder,
            decoder,
            discriminator,
            ..
        } = self;
        for (n, m) in [("encoder", encoder), ("decoder", decoder), ("discriminator", discriminator)] {
            for (i, t) in m.tensors_mut().into_iter().enumerate() {
                out.push((format!("{n}.{}.{}", i / 2, if i % 2 == 0 { "weight" } else { "bias" }), t));
            }
        }
        out
    }

    /// Decodes `z ~ N(0, I)` conditioned on each label.
    pub fn generate(&self, labels: &[usize], rng: &mut SeededRng) -> Result<Tensor> {
        let z = rng.normal_tensor(labels.len(), self.dim_z);
        self.decode(&z, labels)
    }

    pub fn decode(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        let onehot = Tensor::one_hot(labels, self.classes)?;
        self.decoder.apply(&Tensor::hcat(z, &onehot)?)
    }
}

/// One step of the baseline: encoder from `lambda_kl L_kl + lambda_rec
/// L_rec`, decoder from `L_rec + L_GD`, discriminator from `L_D`.
pub fn train_step_baseline(
    params: &mut BaselineParams,
    optim: &mut Optimizers,
    batch: &Batch,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<LossBreakdown> {
    let labels = batch.class_labels()?;
    let n = batch.x.rows();
    let mut g = Graph::new();
    let x = g.input(batch.x.clone());
    let onehot = g.input(Tensor::one_hot(&labels, params.classes)?);
    let enc = params.encoder.bind(&mut g);
    let dec = params.decoder.bind(&mut g);
    let disc = params.discriminator.bind(&mut g);

    let enc_in = g.concat_cols(&[x, onehot])?;
    let (mu, log_var) = params.encoder.forward_pair(&mut g, &enc, enc_in)?;
    let kl_rows = ops::kl_std_rows(&mut g, mu, log_var)?;
    let l_kl = g.mean(kl_rows)?;
    let eps = g.input(rng.normal_tensor(n, params.dim_z));
    let z = ops::reparameterize(&mut g, mu, log_var, eps)?;
    let dec_in = g.concat_cols(&[z, onehot])?;
    let x_rec = params.decoder.forward(&mut g, &dec, dec_in)?;
    let l_rec = losses::rec_loss(&mut g, x, x_rec)?;
    let z_p = g.input(rng.normal_tensor(n, params.dim_z));
    let dec_in_p = g.concat_cols(&[z_p, onehot])?;
    let x_prior = params.decoder.forward(&mut g, &dec, dec_in_p)?;

    let real_in = g.concat_cols(&[x, onehot])?;
    let rec_in = g.concat_cols(&[x_rec, onehot])?;
    let prior_in = g.concat_cols(&[x_prior, onehot])?;
    let d_real = params.discriminator.forward(&mut g, &disc, real_in)?;
    let d_rec = params.discriminator.forward(&mut g, &disc, rec_in)?;
    let d_prior = params.discriminator.forward(&mut g, &disc, prior_in)?;
    let (l_d_adv, l_gd_adv) = losses::gan_losses(&mut g, d_real, d_rec, d_prior)?;

    let val = |v| g.value(v).item();
    let breakdown = LossBreakdown {
        l_rec: val(l_rec),
        l_kl: val(l_kl),
        l_d_adv: val(l_d_adv),
        l_gd_adv: val(l_gd_adv),
        ..Default::default()
    }
    .with_elbo();
    if !breakdown.is_finite() {
        let step = optim.values().map(|s| s.step).max().unwrap_or(0);
        let name = LossBreakdown::FIELDS
            .iter()
            .zip(breakdown.values())
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| *n)
            .unwrap_or("elbo_estimate");
        return Err(Error::NonFiniteLoss { name, step });
    }

    let kl_w = g.scale(l_kl, config.lambda_kl())?;
    let rec_w = g.scale(l_rec, config.lambda_rec())?;
    let loss_enc = g.add(kl_w, rec_w)?;
    let loss_dec = g.add(l_rec, l_gd_adv)?;
    let grads_enc = enc.grads(&g.backward(loss_enc)?);
    let grads_dec = dec.grads(&g.backward(loss_dec)?);
    let grads_disc = disc.grads(&g.backward(l_d_adv)?);
    drop(g);

    let cfg = adam_config(config);
    for (name, grads) in GROUPS.iter().zip([grads_enc, grads_dec, grads_disc]) {
        let state = optim
            .get_mut(*name)
            .ok_or_else(|| Error::InvalidArgument(format!("no optimizer state for `{name}`")))?;
        adam_update(name, &mut params.mlp_mut(name).tensors_mut(), &grads, state, &cfg)?;
    }
    Ok(breakdown)
}

/// Trains the baseline for `config.epochs` epochs.
pub fn train_baseline_cvaegan(
    config: &TrainConfig,
    ds: &crate::data::Dataset,
) -> Result<(BaselineParams, super::TrainHistory)> {
    super::require_labeled(ds)?;
    let mut config = config.clone();
    config.mode = super::Mode::BaselineCvaegan;
    let mut t = super::Trainer::new(&config)?;
    t.run(ds)?;
    match t.model {
        super::Model::Baseline(p) => Ok((p, t.history)),
        super::Model::Disentangled(_) => unreachable!("mode is baseline"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_toy_dataset;

    #[test]
    fn shapes_and_named_tensors() {
        let cfg = TrainConfig::toy();
        let p = build_baseline(&cfg, &mut SeededRng::new(1)).unwrap();
        assert_eq!(p.encoder.spec.input_dim, 5);
        assert_eq!(p.encoder.spec.output_dim, 4);
        assert_eq!(p.decoder.spec.input_dim, 7);
        let names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "encoder.0.weight");
        assert_eq!(names.len(), p.clone().named_tensors_mut().len());
        let x = p.generate(&[0, 1, 2, 2], &mut SeededRng::new(2)).unwrap();
        assert_eq!(x.shape(), &[4, 2]);
    }

    #[test]
    fn training_is_deterministic_and_moves_every_group() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            mode: super::super::Mode::BaselineCvaegan,
            ..TrainConfig::toy()
        };
        let ds = generate_toy_dataset(30, 4).unwrap();
        let (a, ha) = train_baseline_cvaegan(&cfg, &ds).unwrap();
        let (b, hb) = train_baseline_cvaegan(&cfg, &ds).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.loss_trace(), hb.loss_trace());
        let init = build_baseline(&cfg, &mut SeededRng::derived(cfg.seed, 1)).unwrap();
        assert_ne!(a.encoder, init.encoder);
        assert_ne!(a.decoder, init.decoder);
        assert_ne!(a.discriminator, init.discriminator);
        assert_eq!(ha.epochs[1].losses.l_gm, 0.0);
    }
}
