use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Two-stage training of the disentangled model on labeled data.
    #[default]
    Full,
    /// Finetuning on unlabeled data with the moment-matched prior.
    SemisupervisedFinetune,
    /// Conditional VAE-GAN with a single encoder.
    BaselineCvaegan,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::SemisupervisedFinetune => "semisupervised-finetune",
            Mode::BaselineCvaegan => "baseline-cvaegan",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "semisupervised-finetune" => Ok(Mode::SemisupervisedFinetune),
            "baseline-cvaegan" => Ok(Mode::BaselineCvaegan),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Hyperparameters of a run. Defaults reproduce the toy setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub data_dim: usize,
    pub dim_z_s: usize,
    pub dim_z_u: usize,
    pub classes: usize,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub cls_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub activation: Activation,
    /// Stage-one (mixture loss) steps per joint step.
    pub n_gm: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub lambda_lkd: f64,
    /// Defaults to `10 / data_dim`.
    pub lambda_kl: Option<f64>,
    /// Defaults to `1 / dim_z_u`.
    pub lambda_rec: Option<f64>,
    pub sigma_c_decay_factor: f64,
    /// First (1-based) epoch that runs with the decayed `Sigma_c` rate.
    pub sigma_c_decay_epoch: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl TrainConfig {
    pub fn toy() -> Self {
        Self {
            data_dim: 2,
            dim_z_s: 2,
            dim_z_u: 2,
            classes: 3,
            enc_hidden: vec![32, 64, 64],
            dec_hidden: vec![64, 64, 32],
            cls_hidden: vec![64],
            disc_hidden: vec![32, 64, 64],
            activation: Activation::Relu,
            n_gm: 3,
            batch_size: 64,
            epochs: 50,
            finetune_epochs: 10,
            learning_rate: 5e-4,
            beta1: 0.0,
            beta2: 0.9,
            adam_eps: 1e-8,
            lambda_lkd: 0.1,
            lambda_kl: None,
            lambda_rec: None,
            sigma_c_decay_factor: 0.01,
            sigma_c_decay_epoch: 3,
            seed: 0,
            mode: Mode::Full,
        }
    }

    pub fn lambda_kl(&self) -> f64 {
        self.lambda_kl.unwrap_or(10.0 / self.data_dim as f64)
    }

    pub fn lambda_rec(&self) -> f64 {
        self.lambda_rec.unwrap_or(1.0 / self.dim_z_u as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.data_dim == 0 || self.dim_z_s == 0 || self.dim_z_u == 0 {
            return bad("data_dim, dim_z_s and dim_z_u must be >= 1");
        }
        if self.classes < 2 {
            return bad("classes must be >= 2");
        }
        let hidden = [&self.enc_hidden, &self.dec_hidden, &self.cls_hidden, &self.disc_hidden];
        if hidden.iter().any(|h| h.contains(&0)) {
            return bad("hidden layer widths must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) {
            return bad("learning_rate and adam_eps must be > 0");
        }
        let lambdas = [self.lambda_lkd, self.lambda_kl(), self.lambda_rec(), self.sigma_c_decay_factor];
        if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("loss weights and the decay factor must be finite and >= 0");
        }
        Ok(())
    }
}
