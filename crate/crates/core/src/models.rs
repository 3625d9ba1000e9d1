//! The five networks and the learnable mixture parameters.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, Tensor, Var};
use crate::distributions::ops::MixtureVars;
use crate::distributions::{DiagGaussian, GaussianMixture};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::training::TrainConfig;

/// Lower/upper clamp applied to discriminator probabilities.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputHead {
    Linear,
    /// Two linear outputs of `output_dim` each: mean and log-variance.
    GaussianPair,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config(format!("MLP dimensions must all be >= 1: {self:?}")));
        }
        Ok(())
    }

    fn final_width(&self) -> usize {
        match self.output_head {
            OutputHead::GaussianPair => 2 * self.output_dim,
            _ => self.output_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `in x out`
    pub weight: Tensor,
    /// `1 x out`
    pub bias: Tensor,
}

/// Fully connected network: hidden layers with a shared activation, then a
/// linear layer and the output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Linear>,
}

/// Graph handles for an [`Mlp`]'s weights, in layer order.
#[derive(Clone, Debug)]
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl MlpVars {
    /// Gradients in the order of [`Mlp::tensors_mut`].
    pub fn grads(&self, grads: &Gradients) -> Vec<Tensor> {
        self.layers
            .iter()
            .flat_map(|&(w, b)| [grads.get(w).clone(), grads.get(b).clone()])
            .collect()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

impl Mlp {
    /// Uniform init in `+-1/sqrt(fan_in)` for weights and biases.
    pub fn new(spec: MlpSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let mut dims = vec![spec.input_dim];
        dims.extend(&spec.hidden_dims);
        dims.push(spec.final_width());
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
                Linear {
                    weight: Tensor::from_vec(fan_in, fan_out, draw(fan_in * fan_out)),
                    bias: Tensor::from_vec(1, fan_out, draw(fan_out)),
                }
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn bind(&self, g: &mut Graph) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone())))
                .collect(),
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} input features, got {cols}",
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Output of the last linear layer with the head activation applied
    /// (for a Gaussian pair, the concatenated `[mu | log_var]`).
    pub fn forward(&self, g: &mut Graph, vars: &MlpVars, x: Var) -> Result<Var> {
        self.check_input(g.value(x).cols())?;
        let mut h = x;
        let last = vars.layers.len() - 1;
        for (i, &(w, b)) in vars.layers.iter().enumerate() {
            let xw = g.matmul(h, w)?;
            h = g.add_row(xw, b)?;
            if i < last {
                h = match self.spec.hidden_activation {
                    Activation::Relu => g.relu(h)?,
                    Activation::Tanh => g.tanh(h)?,
                };
            }
        }
        if self.spec.output_head == OutputHead::Sigmoid {
            let s = g.sigmoid(h)?;
            h = g.clamp(s, PROB_CLAMP, 1.0 - PROB_CLAMP)?;
        }
        Ok(h)
    }

    /// `(mu, log_var)` for a [`OutputHead::GaussianPair`] network.
    pub fn forward_pair(&self, g: &mut Graph, vars: &MlpVars, x: Var) -> Result<(Var, Var)> {
        debug_assert_eq!(self.spec.output_head, OutputHead::GaussianPair);
        let out = self.forward(g, vars, x)?;
        let d = self.spec.output_dim;
        Ok((g.slice_cols(out, 0, d)?, g.slice_cols(out, d, 2 * d)?))
    }

    /// Direct evaluation without recording a graph.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x.cols())?;
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&l.weight);
            let n = z.cols();
            for (k, v) in z.data_mut().iter_mut().enumerate() {
                *v += l.bias.data()[k % n];
            }
            if i < last {
                z = match self.spec.hidden_activation {
                    Activation::Relu => z.map(|v| v.max(0.0)),
                    Activation::Tanh => z.map(f64::tanh),
                };
            }
            h = z;
        }
        if self.spec.output_head == OutputHead::Sigmoid {
            h = h.map(|v| (1.0 / (1.0 + (-v).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
        }
        if !h.all_finite() {
            return Err(Error::InvalidArgument("network produced non-finite output".into()));
        }
        Ok(h)
    }
}

/// Learnable means and log-variances of the class-conditional prior on
/// `z_s`, one row per class.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub means: Tensor,
    pub log_vars: Tensor,
}

impl MixtureParams {
    pub fn n_classes(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn to_mixture(&self) -> GaussianMixture {
        GaussianMixture::from_tensors(&self.means, &self.log_vars).expect("mixture tensors are consistent")
    }

    pub fn component(&self, c: usize) -> DiagGaussian {
        DiagGaussian {
            mu: self.means.row_slice(c).to_vec(),
            log_var: self.log_vars.row_slice(c).to_vec(),
        }
    }

    pub fn bind(&self, g: &mut Graph) -> MixtureVars {
        let c = self.n_classes();
        MixtureVars {
            means: g.param(self.means.clone()),
            log_vars: g.param(self.log_vars.clone()),
            log_priors: vec![-(c as f64).ln(); c],
        }
    }
}

/// Parameter groups, each updated by exactly one rule of the training loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    EncoderS,
    EncoderU,
    Decoder,
    AdvClassifier,
    Discriminator,
    MixtureMeans,
    MixtureLogVars,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::EncoderS,
        Group::EncoderU,
        Group::Decoder,
        Group::AdvClassifier,
        Group::Discriminator,
        Group::MixtureMeans,
        Group::MixtureLogVars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::EncoderS => "enc_s",
            Group::EncoderU => "enc_u",
            Group::Decoder => "decoder",
            Group::AdvClassifier => "adv_classifier",
            Group::Discriminator => "discriminator",
            Group::MixtureMeans => "mixture.means",
            Group::MixtureLogVars => "mixture.log_vars",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub enc_s: Mlp,
    pub enc_u: Mlp,
    pub decoder: Mlp,
    pub adv_classifier: Mlp,
    pub discriminator: Mlp,
    pub mixture: MixtureParams,
}

/// Digest of a list of tensors, for change audits.
pub fn digest(tensors: &[&Tensor]) -> u64 {
    let mut h = DefaultHasher::new();
    for t in tensors {
        for &d in t.shape() {
            h.write_usize(d);
        }
        for v in t.data() {
            h.write_u64(v.to_bits());
        }
    }
    h.finish()
}

pub(crate) fn encoder_spec(config: &TrainConfig, input_dim: usize, out: usize, head: OutputHead) -> MlpSpec {
    MlpSpec {
        input_dim,
        hidden_dims: config.enc_hidden.clone(),
        output_dim: out,
        hidden_activation: config.activation,
        output_head: head,
    }
}

pub(crate) fn decoder_spec(config: &TrainConfig, input_dim: usize) -> MlpSpec {
    MlpSpec {
        input_dim,
        hidden_dims: config.dec_hidden.clone(),
        output_dim: config.data_dim,
        hidden_activation: config.activation,
        output_head: OutputHead::Linear,
    }
}

pub(crate) fn discriminator_spec(config: &TrainConfig) -> MlpSpec {
    MlpSpec {
        input_dim: config.data_dim + config.classes,
        hidden_dims: config.disc_hidden.clone(),
        output_dim: 1,
        hidden_activation: config.activation,
        output_head: OutputHead::Sigmoid,
    }
}

/// Initializes all networks and the mixture (`mu_c ~ N(0, I)`, unit
/// variances).
pub fn build_networks(config: &TrainConfig, rng: &mut SeededRng) -> Result<NetworkParams> {
    config.validate()?;
    let enc_s = Mlp::new(encoder_spec(config, config.data_dim, config.dim_z_s, OutputHead::Linear), rng)?;
    let enc_u = Mlp::new(
        encoder_spec(config, config.data_dim, config.dim_z_u, OutputHead::GaussianPair),
        rng,
    )?;
    let decoder = Mlp::new(decoder_spec(config, config.dim_z_s + config.dim_z_u), rng)?;
    let adv_classifier = Mlp::new(
        MlpSpec {
            input_dim: config.dim_z_u,
            hidden_dims: config.cls_hidden.clone(),
            output_dim: config.classes,
            hidden_activation: config.activation,
            output_head: OutputHead::Linear,
        },
        rng,
    )?;
    let discriminator = Mlp::new(discriminator_spec(config), rng)?;
    let means = rng.normal_tensor(config.classes, config.dim_z_s);
    let log_vars = Tensor::zeros(config.classes, config.dim_z_s);
    Ok(NetworkParams {
        enc_s,
        enc_u,
        decoder,
        adv_classifier,
        discriminator,
        mixture: MixtureParams { means, log_vars },
    })
}

impl NetworkParams {
    pub fn classes(&self) -> usize {
        self.mixture.n_classes()
    }

    pub fn dim_z_s(&self) -> usize {
        self.enc_s.spec.output_dim
    }

    pub fn dim_z_u(&self) -> usize {
        self.enc_u.spec.output_dim
    }

    pub fn data_dim(&self) -> usize {
        self.enc_s.spec.input_dim
    }

    pub fn group(&self, group: Group) -> Vec<&Tensor> {
        match group {
            Group::EncoderS => self.enc_s.tensors(),
            Group::EncoderU => self.enc_u.tensors(),
            Group::Decoder => self.decoder.tensors(),
            Group::AdvClassifier => self.adv_classifier.tensors(),
            Group::Discriminator => self.discriminator.tensors(),
            Group::MixtureMeans => vec![&self.mixture.means],
            Group::MixtureLogVars => vec![&self.mixture.log_vars],
        }
    }

    pub fn group_mut(&mut self, group: Group) -> Vec<&mut Tensor> {
        match group {
            Group::EncoderS => self.enc_s.tensors_mut(),
            Group::EncoderU => self.enc_u.tensors_mut(),
            Group::Decoder => self.decoder.tensors_mut(),
            Group::AdvClassifier => self.adv_classifier.tensors_mut(),
            Group::Discriminator => self.discriminator.tensors_mut(),
            Group::MixtureMeans => vec![&mut self.mixture.means],
            Group::MixtureLogVars => vec![&mut self.mixture.log_vars],
        }
    }

    pub fn group_digest(&self, group: Group) -> u64 {
        digest(&self.group(group))
    }

    /// Every tensor with a stable dotted name, for checkpoints.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        Group::ALL
            .iter()
            .flat_map(|&g| {
                self.group(g)
                    .into_iter()
                    .enumerate()
                    .map(move |(i, t)| (tensor_name(g, i), t))
            })
            .collect()
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let Self {
            enc_s,
            enc_u,
            decoder,
            adv_classifier,
            discriminator,
            mixture,
        } = self;
        let mut out = Vec::new();
        for (g, mlp) in [
            (Group::EncoderS, enc_s),
            (Group::EncoderU, enc_u),
            (Group::Decoder, decoder),
            (Group::AdvClassifier, adv_classifier),
            (Group::Discriminator, discriminator),
        ] {
            for (i, t) in mlp.tensors_mut().into_iter().enumerate() {
                out.push((tensor_name(g, i), t));
            }
        }
        out.push((tensor_name(Group::MixtureMeans, 0), &mut mixture.means));
        out.push((tensor_name(Group::MixtureLogVars, 0), &mut mixture.log_vars));
        out
    }
}

fn tensor_name(g: Group, i: usize) -> String {
    match g {
        Group::MixtureMeans | Group::MixtureLogVars => g.name().to_string(),
        _ => format!("{}.{}.{}", g.name(), i / 2, if i % 2 == 0 { "weight" } else { "bias" }),
    }
}

/// `z_s` point estimates, `n x dim(z_s)`.
pub fn encoder_s_forward(params: &NetworkParams, x: &Tensor) -> Result<Tensor> {
    params.enc_s.apply(x)
}

/// Per-sample `(mu, log_var)` of `q(z_u | x)`, as two `n x dim(z_u)` tensors.
pub fn encoder_u_forward(params: &NetworkParams, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let out = params.enc_u.apply(x)?;
    let d = params.dim_z_u();
    let (mut mu, mut lv) = (Vec::new(), Vec::new());
    for r in 0..out.rows() {
        let row = out.row_slice(r);
        mu.extend_from_slice(&row[..d]);
        lv.extend_from_slice(&row[d..]);
    }
    Ok((Tensor::from_vec(out.rows(), d, mu), Tensor::from_vec(out.rows(), d, lv)))
}

/// The posterior of each sample as a [`DiagGaussian`].
pub fn encoder_u_gaussians(params: &NetworkParams, x: &Tensor) -> Result<Vec<DiagGaussian>> {
    let (mu, lv) = encoder_u_forward(params, x)?;
    Ok((0..mu.rows())
        .map(|r| DiagGaussian {
            mu: mu.row_slice(r).to_vec(),
            log_var: lv.row_slice(r).to_vec(),
        })
        .collect())
}

/// Decodes concatenated `[z_s | z_u]`.
pub fn decoder_forward(params: &NetworkParams, z_s: &Tensor, z_u: &Tensor) -> Result<Tensor> {
    if z_s.cols() != params.dim_z_s() || z_u.cols() != params.dim_z_u() {
        return Err(Error::Shape(format!(
            "decoder expects codes of width {} + {}, got {} + {}",
            params.dim_z_s(),
            params.dim_z_u(),
            z_s.cols(),
            z_u.cols()
        )));
    }
    params.decoder.apply(&Tensor::hcat(z_s, z_u)?)
}

/// Raw logits of the latent adversarial classifier.
pub fn classifier_forward(params: &NetworkParams, z_u: &Tensor) -> Result<Tensor> {
    params.adv_classifier.apply(z_u)
}

/// `[x | one_hot(c)]`, the discriminator's input.
pub fn discriminator_input(x: &Tensor, labels: &[usize], classes: usize) -> Result<Tensor> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    Tensor::hcat(x, &Tensor::one_hot(labels, classes)?)
}

/// `D(x, c)`, clamped into `[1e-7, 1 - 1e-7]`; `n x 1`.
pub fn discriminator_forward(params: &NetworkParams, x: &Tensor, labels: &[usize]) -> Result<Tensor> {
    params
        .discriminator
        .apply(&discriminator_input(x, labels, params.classes())?)
}
