//! Two-stage alternating training, semi-supervised finetuning and the
//! conditional VAE-GAN baseline.
//!
//! Each outer iteration runs `n_gm` mixture-loss steps on freshly sampled
//! batches (updating `Encoder^s` and the mixture), then one joint step that
//! updates the five networks from their own loss compositions:
//!
//! | group            | loss                                   |
//! |------------------|----------------------------------------|
//! | `Encoder^s`      | `L_rec + lambda_lkd L_lkd`             |
//! | `Encoder^u`      | `L_E + lambda_kl L_kl + lambda_rec L_rec` |
//! | adv. classifier  | `L_C`                                  |
//! | decoder          | `L_rec + L_GD`                         |
//! | discriminator    | `L_D`                                  |
//!
//! All five gradients are taken at the same point before any update is
//! applied. The mixture is not touched by joint steps.

mod adam;
mod baseline;
mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, AdamConfig, AdamState};
pub use baseline::{build_baseline, train_baseline_cvaegan, train_step_baseline, BaselineParams};
pub use config::{Mode, TrainConfig};

use crate::autodiff::{Gradients, Graph, Tensor};
use crate::data::{batch_iter, Batch, Dataset};
use crate::distributions::ops;
use crate::distributions::{mixture_total_moments, posterior_from_log_joint, sample_mixture};
use crate::error::{Error, Result};
use crate::losses::{self, LossBreakdown};
use crate::models::{build_networks, Group, MlpVars, NetworkParams};
use crate::rng::SeededRng;

/// Optimizer state per parameter group, keyed by group name.
pub type Optimizers = BTreeMap<String, AdamState>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub losses: LossBreakdown,
    /// Mean mixture loss over the epoch's stage-one steps (0 when none ran).
    pub stage_gm_loss: f64,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// `(epoch, path)` of snapshots written during the run.
    pub snapshots: Vec<(usize, String)>,
}

impl TrainHistory {
    /// Per-epoch losses without timing, for reproducibility comparisons.
    pub fn loss_trace(&self) -> Vec<(usize, [f64; 10], f64)> {
        self.epochs
            .iter()
            .map(|e| (e.epoch, e.losses.values(), e.stage_gm_loss))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,{},stage_gm_loss,wall_secs\n", LossBreakdown::FIELDS.join(","));
        for e in &self.epochs {
            let _ = write!(out, "{}", e.epoch);
            for v in e.losses.values() {
                let _ = write!(out, ",{v:.17e}");
            }
            let _ = writeln!(out, ",{:.17e},{:.3}", e.stage_gm_loss, e.wall_secs);
        }
        out
    }
}

pub(crate) fn adam_config(config: &TrainConfig) -> AdamConfig {
    AdamConfig {
        lr: config.learning_rate,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.adam_eps,
    }
}

pub fn init_optimizers(params: &NetworkParams) -> Optimizers {
    Group::ALL
        .iter()
        .map(|&g| (g.name().to_string(), AdamState::new(&params.group(g))))
        .collect()
}

fn apply_group(
    params: &mut NetworkParams,
    optim: &mut Optimizers,
    group: Group,
    grads: &[Tensor],
    cfg: &AdamConfig,
) -> Result<()> {
    let state = optim
        .get_mut(group.name())
        .ok_or_else(|| Error::InvalidArgument(format!("no optimizer state for `{}`", group.name())))?;
    adam_update(group.name(), &mut params.group_mut(group), grads, state, cfg)
}

fn mlp_grads(vars: &MlpVars, grads: &Gradients) -> Vec<Tensor> {
    vars.grads(grads)
}

/// Sets the `Sigma_c` learning-rate multiplier for the (1-based) epoch
/// about to run.
pub fn apply_sigma_schedule(optim: &mut Optimizers, config: &TrainConfig, epoch: usize) {
    if let Some(st) = optim.get_mut(Group::MixtureLogVars.name()) {
        st.lr_multiplier = if epoch >= config.sigma_c_decay_epoch {
            config.sigma_c_decay_factor
        } else {
            1.0
        };
    }
}

/// Losses of one stage-one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmStepLosses {
    pub l_cls: f64,
    pub l_lkd: f64,
    pub l_gm: f64,
}

/// One Adam step on `Encoder^s`, the mixture means and log-variances from
/// the mixture loss.
pub fn train_stage_gm(
    params: &mut NetworkParams,
    optim: &mut Optimizers,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<GmStepLosses> {
    let labels = batch.class_labels()?;
    let mut g = Graph::new();
    let x = g.input(batch.x.clone());
    let enc = params.enc_s.bind(&mut g);
    let z_s = params.enc_s.forward(&mut g, &enc, x)?;
    let mix = params.mixture.bind(&mut g);
    let gm = losses::gm_loss(&mut g, z_s, &labels, &mix, config.lambda_lkd)?;
    let out = GmStepLosses {
        l_cls: g.value(gm.cls).item(),
        l_lkd: g.value(gm.lkd).item(),
        l_gm: g.value(gm.gm).item(),
    };
    let grads = g.backward(gm.gm)?;
    let cfg = adam_config(config);
    let enc_grads = mlp_grads(&enc, &grads);
    let mean_grad = [grads.get(mix.means).clone()];
    let lv_grad = [grads.get(mix.log_vars).clone()];
    drop(g);
    apply_group(params, optim, Group::EncoderS, &enc_grads, &cfg)?;
    apply_group(params, optim, Group::MixtureMeans, &mean_grad, &cfg)?;
    apply_group(params, optim, Group::MixtureLogVars, &lv_grad, &cfg)?;
    Ok(out)
}

fn check_finite(b: &LossBreakdown, step: u64) -> Result<()> {
    for (name, v) in LossBreakdown::FIELDS.iter().zip(b.values()) {
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { name, step });
        }
    }
    Ok(())
}

/// One end-to-end step on a labeled batch. The mixture parameters enter
/// as constants.
pub fn train_step_joint(
    params: &mut NetworkParams,
    optim: &mut Optimizers,
    batch: &Batch,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<LossBreakdown> {
    let labels = batch.class_labels()?;
    let n = batch.x.rows();
    let classes = params.classes();
    let mixture = params.mixture.to_mixture();

    let mut g = Graph::new();
    let x = g.input(batch.x.clone());
    let enc_s = params.enc_s.bind(&mut g);
    let enc_u = params.enc_u.bind(&mut g);
    let dec = params.decoder.bind(&mut g);
    let cls = params.adv_classifier.bind(&mut g);
    let disc = params.discriminator.bind(&mut g);
    let mix = ops::MixtureVars {
        means: g.input(params.mixture.means.clone()),
        log_vars: g.input(params.mixture.log_vars.clone()),
        log_priors: vec![-(classes as f64).ln(); classes],
    };

    let (mu, log_var) = params.enc_u.forward_pair(&mut g, &enc_u, x)?;
    let kl_rows = ops::kl_std_rows(&mut g, mu, log_var)?;
    let l_kl = g.mean(kl_rows)?;
    let eps = g.input(rng.normal_tensor(n, params.dim_z_u()));
    let z_u = ops::reparameterize(&mut g, mu, log_var, eps)?;
    let logits = params.adv_classifier.forward(&mut g, &cls, z_u)?;
    let (l_c_adv, l_e_adv) = losses::adv_classifier_losses(&mut g, logits, &labels, classes)?;
    let z_s = params.enc_s.forward(&mut g, &enc_s, x)?;
    let gm = losses::gm_loss(&mut g, z_s, &labels, &mix, config.lambda_lkd)?;
    let codes = g.concat_cols(&[z_s, z_u])?;
    let x_rec = params.decoder.forward(&mut g, &dec, codes)?;
    let l_rec = losses::rec_loss(&mut g, x, x_rec)?;
    let (zs_p, zu_p) = losses::sample_prior_codes(&mixture, &labels, params.dim_z_u(), rng);
    let zs_p = g.input(zs_p);
    let zu_p = g.input(zu_p);
    let codes_p = g.concat_cols(&[zs_p, zu_p])?;
    let x_prior = params.decoder.forward(&mut g, &dec, codes_p)?;
    let (l_d_adv, l_gd_adv) = losses::discriminate(&mut g, params, &disc, x, x_rec, x_prior, &labels, &labels)?;

    let val = |v| g.value(v).item();
    let breakdown = LossBreakdown {
        l_rec: val(l_rec),
        l_kl: val(l_kl),
        l_lkd: val(gm.lkd),
        l_cls: val(gm.cls),
        l_gm: val(gm.gm),
        l_e_adv: val(l_e_adv),
        l_c_adv: val(l_c_adv),
        l_d_adv: val(l_d_adv),
        l_gd_adv: val(l_gd_adv),
        elbo_estimate: 0.0,
    }
    .with_elbo();
    check_finite(&breakdown, optim.values().map(|s| s.step).max().unwrap_or(0))?;

    let lkd_w = g.scale(gm.lkd, config.lambda_lkd)?;
    let loss_s = g.add(l_rec, lkd_w)?;
    let kl_w = g.scale(l_kl, config.lambda_kl())?;
    let rec_w = g.scale(l_rec, config.lambda_rec())?;
    let u_partial = g.add(l_e_adv, kl_w)?;
    let loss_u = g.add(u_partial, rec_w)?;
    let loss_dec = g.add(l_rec, l_gd_adv)?;

    let grads_s = mlp_grads(&enc_s, &g.backward(loss_s)?);
    let grads_u = mlp_grads(&enc_u, &g.backward(loss_u)?);
    let grads_c = mlp_grads(&cls, &g.backward(l_c_adv)?);
    let grads_dec = mlp_grads(&dec, &g.backward(loss_dec)?);
    let grads_disc = mlp_grads(&disc, &g.backward(l_d_adv)?);
    drop(g);

    let cfg = adam_config(config);
    apply_group(params, optim, Group::EncoderS, &grads_s, &cfg)?;
    apply_group(params, optim, Group::EncoderU, &grads_u, &cfg)?;
    apply_group(params, optim, Group::AdvClassifier, &grads_c, &cfg)?;
    apply_group(params, optim, Group::Decoder, &grads_dec, &cfg)?;
    apply_group(params, optim, Group::Discriminator, &grads_disc, &cfg)?;
    Ok(breakdown)
}

/// One finetuning step on unlabeled data: `z_s` is regularized towards the
/// moment-matched Gaussian of the frozen mixture, the classifier and
/// mixture losses are dropped, and the discriminator is conditioned on the
/// mixture's most probable class for real and reconstructed samples.
pub fn train_step_finetune(
    params: &mut NetworkParams,
    optim: &mut Optimizers,
    x_batch: &Tensor,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<LossBreakdown> {
    let n = x_batch.rows();
    let mixture = params.mixture.to_mixture();
    let total = mixture_total_moments(&mixture);

    let mut g = Graph::new();
    let x = g.input(x_batch.clone());
    let enc_s = params.enc_s.bind(&mut g);
    let enc_u = params.enc_u.bind(&mut g);
    let dec = params.decoder.bind(&mut g);
    let disc = params.discriminator.bind(&mut g);

    let (mu, log_var) = params.enc_u.forward_pair(&mut g, &enc_u, x)?;
    let kl_rows = ops::kl_std_rows(&mut g, mu, log_var)?;
    let l_kl = g.mean(kl_rows)?;
    let eps = g.input(rng.normal_tensor(n, params.dim_z_u()));
    let z_u = ops::reparameterize(&mut g, mu, log_var, eps)?;
    let z_s = params.enc_s.forward(&mut g, &enc_s, x)?;
    let mu_t = g.input(Tensor::from_vec(n, total.dim(), total.mu.repeat(n)));
    let lv_t = g.input(Tensor::from_vec(n, total.dim(), total.log_var.repeat(n)));
    let l_lkd = losses::neg_log_likelihood(&mut g, z_s, mu_t, lv_t)?;
    let codes = g.concat_cols(&[z_s, z_u])?;
    let x_rec = params.decoder.forward(&mut g, &dec, codes)?;
    let l_rec = losses::rec_loss(&mut g, x, x_rec)?;

    let pseudo: Vec<usize> = (0..n)
        .map(|r| {
            let lj = mixture.log_joint(g.value(z_s).row_slice(r)).expect("dims agree");
            let post = posterior_from_log_joint(&lj);
            (0..post.len()).fold(0, |best, c| if post[c] > post[best] { c } else { best })
        })
        .collect();
    let mut zs_p = Vec::with_capacity(n * mixture.dim());
    let mut prior_labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (z, c) = sample_mixture(&mixture, rng);
        zs_p.extend(z);
        prior_labels.push(c);
    }
    let zs_p = g.input(Tensor::from_vec(n, mixture.dim(), zs_p));
    let zu_p = g.input(rng.normal_tensor(n, params.dim_z_u()));
    let codes_p = g.concat_cols(&[zs_p, zu_p])?;
    let x_prior = params.decoder.forward(&mut g, &dec, codes_p)?;
    let (l_d_adv, l_gd_adv) =
        losses::discriminate(&mut g, params, &disc, x, x_rec, x_prior, &pseudo, &prior_labels)?;

    let val = |v| g.value(v).item();
    let breakdown = LossBreakdown {
        l_rec: val(l_rec),
        l_kl: val(l_kl),
        l_lkd: val(l_lkd),
        l_d_adv: val(l_d_adv),
        l_gd_adv: val(l_gd_adv),
        ..Default::default()
    }
    .with_elbo();
    check_finite(&breakdown, optim.values().map(|s| s.step).max().unwrap_or(0))?;

    let lkd_w = g.scale(l_lkd, config.lambda_lkd)?;
    let loss_s = g.add(l_rec, lkd_w)?;
    let kl_w = g.scale(l_kl, config.lambda_kl())?;
    let rec_w = g.scale(l_rec, config.lambda_rec())?;
    let loss_u = g.add(kl_w, rec_w)?;
    let loss_dec = g.add(l_rec, l_gd_adv)?;
    let grads_s = mlp_grads(&enc_s, &g.backward(loss_s)?);
    let grads_u = mlp_grads(&enc_u, &g.backward(loss_u)?);
    let grads_dec = mlp_grads(&dec, &g.backward(loss_dec)?);
    let grads_disc = mlp_grads(&disc, &g.backward(l_d_adv)?);
    drop(g);

    let cfg = adam_config(config);
    apply_group(params, optim, Group::EncoderS, &grads_s, &cfg)?;
    apply_group(params, optim, Group::EncoderU, &grads_u, &cfg)?;
    apply_group(params, optim, Group::Decoder, &grads_dec, &cfg)?;
    apply_group(params, optim, Group::Discriminator, &grads_disc, &cfg)?;
    Ok(breakdown)
}

/// Parameters of whichever model a run trains.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Disentangled(NetworkParams),
    Baseline(BaselineParams),
}

impl Model {
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        match self {
            Model::Disentangled(p) => p.named_tensors(),
            Model::Baseline(p) => p.named_tensors(),
        }
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        match self {
            Model::Disentangled(p) => p.named_tensors_mut(),
            Model::Baseline(p) => p.named_tensors_mut(),
        }
    }

    pub fn disentangled(&self) -> Option<&NetworkParams> {
        match self {
            Model::Disentangled(p) => Some(p),
            Model::Baseline(_) => None,
        }
    }

    pub fn baseline(&self) -> Option<&BaselineParams> {
        match self {
            Model::Baseline(p) => Some(p),
            Model::Disentangled(_) => None,
        }
    }
}

/// Complete training state: everything needed to continue a run exactly.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub optim: Optimizers,
    pub rng: SeededRng,
    /// Completed epochs.
    pub epoch: usize,
    pub history: TrainHistory,
}

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

impl Trainer {
    /// Fresh state for `config.mode` (full or baseline).
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = SeededRng::derived(config.seed, INIT_STREAM);
        let (model, optim) = match config.mode {
            Mode::Full => {
                let p = build_networks(config, &mut init_rng)?;
                let o = init_optimizers(&p);
                (Model::Disentangled(p), o)
            }
            Mode::BaselineCvaegan => {
                let p = build_baseline(config, &mut init_rng)?;
                let o = p.init_optimizers();
                (Model::Baseline(p), o)
            }
            Mode::SemisupervisedFinetune => {
                return Err(Error::Config(
                    "finetuning starts from pretrained parameters; use Trainer::for_finetune".into(),
                ))
            }
        };
        Ok(Self {
            config: config.clone(),
            model,
            optim,
            rng: SeededRng::derived(config.seed, TRAIN_STREAM),
            epoch: 0,
            history: TrainHistory {
                seed: config.seed,
                ..Default::default()
            },
        })
    }

    /// Finetuning state on top of pretrained parameters, with fresh
    /// optimizer moments.
    pub fn for_finetune(config: &TrainConfig, params: NetworkParams) -> Result<Self> {
        config.validate()?;
        let mut config = config.clone();
        config.mode = Mode::SemisupervisedFinetune;
        let optim = init_optimizers(&params);
        Ok(Self {
            rng: SeededRng::derived(config.seed, TRAIN_STREAM),
            history: TrainHistory {
                seed: config.seed,
                ..Default::default()
            },
            config,
            model: Model::Disentangled(params),
            optim,
            epoch: 0,
        })
    }

    pub fn target_epochs(&self) -> usize {
        match self.config.mode {
            Mode::SemisupervisedFinetune => self.config.finetune_epochs,
            _ => self.config.epochs,
        }
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.target_epochs()
    }

    /// Runs one pass of joint (or finetuning) steps over `ds`.
    pub fn run_epoch(&mut self, ds: &Dataset) -> Result<&EpochRecord> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let labeled = self.config.mode != Mode::SemisupervisedFinetune;
        if labeled {
            if let Some(&y) = ds.labels.iter().find(|&&y| y < 0 || y as usize >= self.config.classes) {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    classes: self.config.classes,
                });
            }
        }
        let start = Instant::now();
        let epoch = self.epoch + 1;
        apply_sigma_schedule(&mut self.optim, &self.config, epoch);
        let batches = batch_iter(ds.len(), self.config.batch_size, self.config.seed, epoch as u64);
        let mut sum = LossBreakdown::default();
        let mut gm_sum = 0.0;
        let mut gm_steps = 0usize;
        for idx in &batches {
            let batch = ds.batch(idx);
            let step = match (&mut self.model, self.config.mode) {
                (Model::Disentangled(p), Mode::Full) => {
                    for _ in 0..self.config.n_gm {
                        let k = self.config.batch_size.min(ds.len());
                        let gm_idx = index::sample(&mut self.rng, ds.len(), k).into_vec();
                        let gm_batch = ds.batch(&gm_idx);
                        gm_sum += train_stage_gm(p, &mut self.optim, &gm_batch, &self.config)?.l_gm;
                        gm_steps += 1;
                    }
                    train_step_joint(p, &mut self.optim, &batch, &self.config, &mut self.rng)?
                }
                (Model::Disentangled(p), Mode::SemisupervisedFinetune) => {
                    train_step_finetune(p, &mut self.optim, &batch.x, &self.config, &mut self.rng)?
                }
                (Model::Baseline(p), Mode::BaselineCvaegan) => {
                    train_step_baseline(p, &mut self.optim, &batch, &self.config, &mut self.rng)?
                }
                (_, mode) => {
                    return Err(Error::Config(format!(
                        "model kind does not match mode `{}`",
                        mode.as_str()
                    )))
                }
            };
            sum.accumulate(&step, 1.0 / batches.len() as f64);
        }
        self.epoch = epoch;
        self.history.epochs.push(EpochRecord {
            epoch,
            losses: sum,
            stage_gm_loss: if gm_steps > 0 { gm_sum / gm_steps as f64 } else { 0.0 },
            wall_secs: start.elapsed().as_secs_f64(),
        });
        Ok(self.history.epochs.last().expect("just pushed"))
    }

    /// Runs epochs until the configured count is reached.
    pub fn run(&mut self, ds: &Dataset) -> Result<()> {
        while !self.is_done() {
            self.run_epoch(ds)?;
        }
        Ok(())
    }
}

fn require_labeled(ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&y) = ds.labels.iter().find(|&&y| y < 0) {
        return Err(Error::LabelOutOfRange {
            label: y,
            classes: ds.classes,
        });
    }
    Ok(())
}

/// Full two-stage training of the disentangled model.
pub fn train(config: &TrainConfig, ds: &Dataset) -> Result<(NetworkParams, TrainHistory)> {
    require_labeled(ds)?;
    let mut config = config.clone();
    config.mode = Mode::Full;
    let mut t = Trainer::new(&config)?;
    t.run(ds)?;
    match t.model {
        Model::Disentangled(p) => Ok((p, t.history)),
        Model::Baseline(_) => unreachable!("mode is full"),
    }
}

/// Finetunes pretrained parameters on unlabeled points for
/// `config.finetune_epochs` epochs. Labels in `ds` are ignored; the
/// mixture and the latent classifier stay fixed.
pub fn finetune_semisupervised(
    params: &NetworkParams,
    ds: &Dataset,
    config: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut t = Trainer::for_finetune(config, params.clone())?;
    t.run(&ds.without_labels())?;
    match t.model {
        Model::Disentangled(p) => Ok((p, t.history)),
        Model::Baseline(_) => unreachable!("finetuning keeps the disentangled model"),
    }
}
