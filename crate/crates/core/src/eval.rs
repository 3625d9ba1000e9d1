//! Sample-quality metrics and latent-space procedures: classifier score,
//! intra-class diversity, traversals, code swapping and inpainting.

use rand::seq::index;

use crate::autodiff::{Graph, Tensor};
use crate::data::Dataset;
use crate::distributions::ops;
use crate::error::{Error, Result};
use crate::losses::sample_prior_codes;
use crate::models::{
    decoder_forward, encoder_s_forward, encoder_u_forward, Activation, Mlp, MlpSpec, NetworkParams, OutputHead,
};
use crate::rng::SeededRng;
use crate::training::{adam_update, AdamConfig, AdamState, BaselineParams};

/// Anything that can draw class-conditional samples.
pub trait Generator {
    fn classes(&self) -> usize;
    fn generate(&self, labels: &[usize], rng: &mut SeededRng) -> Result<Tensor>;
}

impl Generator for NetworkParams {
    fn classes(&self) -> usize {
        NetworkParams::classes(self)
    }

    /// `z_s ~ N(mu_c, Sigma_c)`, `z_u ~ N(0, I)`, decoded.
    fn generate(&self, labels: &[usize], rng: &mut SeededRng) -> Result<Tensor> {
        crate::losses::check_labels(labels, self.classes())?;
        let (zs, zu) = sample_prior_codes(&self.mixture.to_mixture(), labels, self.dim_z_u(), rng);
        decoder_forward(self, &zs, &zu)
    }
}

impl Generator for BaselineParams {
    fn classes(&self) -> usize {
        self.classes
    }

    fn generate(&self, labels: &[usize], rng: &mut SeededRng) -> Result<Tensor> {
        BaselineParams::generate(self, labels, rng)
    }
}

/// `n_per_class` generated points for every class, labeled.
pub fn generate_per_class(gen: &dyn Generator, n_per_class: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::EmptyDataset);
    }
    let labels: Vec<usize> = (0..gen.classes()).flat_map(|c| std::iter::repeat_n(c, n_per_class)).collect();
    let x = gen.generate(&labels, rng)?;
    Dataset::new(x, labels.iter().map(|&c| c as i64).collect(), gen.classes())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub min_accuracy: f64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 40,
            batch_size: 64,
            learning_rate: 1e-3,
            min_accuracy: 0.98,
            seed: 0,
        }
    }
}

/// Classifier trained on real data, used to score generated samples.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleClassifier {
    pub net: Mlp,
    pub classes: usize,
    pub held_out_accuracy: f64,
    pub min_accuracy: f64,
}

impl OracleClassifier {
    /// Trains with softmax cross entropy on `train` and records accuracy on
    /// `held_out`. Unlabeled rows are rejected.
    pub fn train(train: &Dataset, held_out: &Dataset, opts: &OracleOptions) -> Result<Self> {
        if train.is_empty() || held_out.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let classes = train.classes;
        let mut rng = SeededRng::new(opts.seed);
        let mut net = Mlp::new(
            MlpSpec {
                input_dim: train.dim(),
                hidden_dims: vec![opts.hidden],
                output_dim: classes,
                hidden_activation: Activation::Relu,
                output_head: OutputHead::Linear,
            },
            &mut rng,
        )?;
        let mut state = AdamState::new(&net.tensors());
        let cfg = AdamConfig {
            lr: opts.learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        for epoch in 0..opts.epochs {
            for idx in crate::data::batch_iter(train.len(), opts.batch_size, opts.seed, epoch as u64) {
                let b = train.batch(&idx);
                let labels = b.class_labels()?;
                let mut g = Graph::new();
                let vars = net.bind(&mut g);
                let x = g.input(b.x);
                let logits = net.forward(&mut g, &vars, x)?;
                let logp = ops::log_softmax_rows(&mut g, logits)?;
                let onehot = g.input(Tensor::one_hot(&labels, classes)?);
                let picked = g.mul(logp, onehot)?;
                let total = g.sum(picked)?;
                let loss = g.scale(total, -1.0 / labels.len() as f64)?;
                let grads = vars.grads(&g.backward(loss)?);
                drop(g);
                adam_update("oracle", &mut net.tensors_mut(), &grads, &mut state, &cfg)?;
            }
        }
        let mut oracle = Self {
            net,
            classes,
            held_out_accuracy: 0.0,
            min_accuracy: opts.min_accuracy,
        };
        oracle.held_out_accuracy = oracle.accuracy(held_out)?;
        Ok(oracle)
    }

    /// Row-wise class probabilities.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.net.apply(x)?;
        let mut out = logits.clone();
        for r in 0..logits.rows() {
            let row = logits.row_slice(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            for (c, v) in row.iter().enumerate() {
                out.set(r, c, (v - m).exp() / z);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows()).map(|r| argmax(p.row_slice(r))).collect())
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let pred = self.predict(&ds.x)?;
        let hits = pred.iter().zip(&ds.labels).filter(|(p, &y)| **p as i64 == y).count();
        Ok(hits as f64 / ds.len() as f64)
    }

    /// Errors unless the held-out accuracy meets the threshold.
    pub fn ensure_reliable(&self) -> Result<()> {
        if self.held_out_accuracy < self.min_accuracy {
            return Err(Error::OracleAccuracy {
                accuracy: self.held_out_accuracy,
                required: self.min_accuracy,
            });
        }
        Ok(())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

/// `exp(mean_x KL(p(y|x) || p(y)))` with `p(y)` the mean of the per-sample
/// posteriors.
pub fn classifier_score_from_probs(probs: &Tensor) -> Result<f64> {
    if probs.rows() == 0 || probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n, c) = (probs.rows(), probs.cols());
    let mut py = vec![0.0; c];
    for r in 0..n {
        for (k, p) in probs.row_slice(r).iter().enumerate() {
            py[k] += p / n as f64;
        }
    }
    let mut kl = 0.0;
    for r in 0..n {
        for (k, &p) in probs.row_slice(r).iter().enumerate() {
            if p > 0.0 {
                kl += p * (p.ln() - py[k].ln());
            }
        }
    }
    Ok((kl / n as f64).exp())
}

pub fn classifier_score(samples: &Tensor, oracle: &OracleClassifier) -> Result<f64> {
    oracle.ensure_reliable()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    classifier_score_from_probs(&oracle.predict_proba(samples)?)
}

/// Gaussian similarity `exp(-|x - x'|^2 / 2h^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbfKernel {
    pub bandwidth: f64,
}

impl RbfKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { bandwidth })
    }

    /// Bandwidth set to the median pairwise distance of `points`.
    pub fn median_bandwidth(points: &Tensor) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::InvalidArgument("median bandwidth needs at least two points".into()));
        }
        let mut d = Vec::with_capacity(points.rows() * (points.rows() - 1) / 2);
        for i in 0..points.rows() {
            for j in i + 1..points.rows() {
                d.push(sq_dist(points.row_slice(i), points.row_slice(j)).sqrt());
            }
        }
        d.sort_by(f64::total_cmp);
        let m = d.len();
        let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
        Self::new(med)
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (-sq_dist(a, b) / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `1 - mean over all ordered pairs (self-pairs included) of k(x, x')`.
pub fn intra_class_diversity(x: &Tensor, kernel: impl Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("diversity needs at least two samples, got {n}")));
    }
    let mut s = 0.0;
    for i in 0..n {
        s += kernel(x.row_slice(i), x.row_slice(i));
        for j in i + 1..n {
            s += 2.0 * kernel(x.row_slice(i), x.row_slice(j));
        }
    }
    Ok(1.0 - s / (n * n) as f64)
}

/// Mean over rows of `from` of the distance to the nearest row of `to`.
pub fn mean_nn_distance(from: &Tensor, to: &Tensor) -> Result<f64> {
    if from.rows() == 0 || to.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if from.cols() != to.cols() {
        return Err(Error::Dimension {
            expected: to.cols(),
            got: from.cols(),
        });
    }
    let total: f64 = (0..from.rows())
        .map(|i| {
            (0..to.rows())
                .map(|j| sq_dist(from.row_slice(i), to.row_slice(j)))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(total / from.rows() as f64)
}

/// Mean distance from each row to its nearest other row.
pub fn internal_nn_distance(x: &Tensor) -> Result<f64> {
    if x.rows() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let total: f64 = (0..x.rows())
        .map(|i| {
            (0..x.rows())
                .filter(|&j| j != i)
                .map(|j| sq_dist(x.row_slice(i), x.row_slice(j)))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(total / x.rows() as f64)
}

/// Random subset of at most `n` rows, for metrics that are quadratic in
/// the sample count.
pub fn subsample(x: &Tensor, n: usize, rng: &mut SeededRng) -> Tensor {
    if x.rows() <= n {
        return x.clone();
    }
    let mut idx = index::sample(rng, x.rows(), n).into_vec();
    idx.sort_unstable();
    x.select_rows(&idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraversalMode {
    /// Interpolate `z_s` inside class `c`; `z_u` fixed.
    VaryZs,
    /// Interpolate `z_u`; `z_s` fixed.
    VaryZu,
    /// Set one coordinate of `z_u` to each grid value; everything else fixed.
    SingleZuDim(usize),
}

impl std::str::FromStr for TraversalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vary-zs" => Ok(Self::VaryZs),
            "vary-zu" => Ok(Self::VaryZu),
            _ => s
                .strip_prefix("zu-dim-")
                .and_then(|d| d.parse().ok())
                .map(Self::SingleZuDim)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown traversal mode `{s}` (expected vary-zs, vary-zu or zu-dim-<k>)"
                    ))
                }),
        }
    }
}

/// Codes a traversal starts from: interpolation endpoints `z1`, `z2` and
/// the code held fixed (`z_u` for [`TraversalMode::VaryZs`], otherwise the
/// mapped `z_s`).
#[derive(Clone, Debug, PartialEq)]
pub struct Endpoints {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub fixed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Traversal {
    pub alphas: Vec<f64>,
    /// Interpolated codes before the class map, one row per alpha.
    pub raw: Tensor,
    pub z_s: Tensor,
    pub z_u: Tensor,
    pub outputs: Tensor,
}

/// Samples endpoints for class `c` and decodes the traversal.
pub fn latent_traversal(
    params: &NetworkParams,
    class: usize,
    alphas: &[f64],
    mode: TraversalMode,
    rng: &mut SeededRng,
) -> Result<Traversal> {
    crate::losses::check_labels(&[class], params.classes())?;
    let (ds, du) = (params.dim_z_s(), params.dim_z_u());
    let mut draw = |d: usize| -> Vec<f64> { (0..d).map(|_| rng.normal()).collect() };
    let ep = match mode {
        TraversalMode::VaryZs => Endpoints {
            z1: draw(ds),
            z2: draw(ds),
            fixed: draw(du),
        },
        TraversalMode::VaryZu | TraversalMode::SingleZuDim(_) => {
            let comp = params.mixture.component(class);
            let eps = draw(ds);
            let fixed = crate::distributions::reparameterize(&comp, &eps)?;
            let z1 = draw(du);
            Endpoints {
                z2: if matches!(mode, TraversalMode::VaryZu) { draw(du) } else { z1.clone() },
                z1,
                fixed,
            }
        }
    };
    traverse_from(params, class, &ep, alphas, mode)
}

/// Deterministic traversal from explicit endpoints. Codes are
/// `alpha z1 + (1 - alpha) z2`; for [`TraversalMode::VaryZs`] they are then
/// mapped into class `c` as `z * sigma_c + mu_c`. In single-dimension mode
/// `z1` is the base code and each alpha is the value of the swept
/// coordinate.
pub fn traverse_from(
    params: &NetworkParams,
    class: usize,
    ep: &Endpoints,
    alphas: &[f64],
    mode: TraversalMode,
) -> Result<Traversal> {
    crate::losses::check_labels(&[class], params.classes())?;
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let (ds, du) = (params.dim_z_s(), params.dim_z_u());
    let (moving, fixed_dim) = match mode {
        TraversalMode::VaryZs => (ds, du),
        _ => (du, ds),
    };
    if ep.z1.len() != moving || ep.z2.len() != moving {
        return Err(Error::Dimension {
            expected: moving,
            got: ep.z1.len().max(ep.z2.len()),
        });
    }
    if ep.fixed.len() != fixed_dim {
        return Err(Error::Dimension {
            expected: fixed_dim,
            got: ep.fixed.len(),
        });
    }
    if let TraversalMode::SingleZuDim(k) = mode {
        if k >= du {
            return Err(Error::InvalidArgument(format!("z_u has {du} dims, cannot sweep dim {k}")));
        }
    }
    let comp = params.mixture.component(class);
    let sigma: Vec<f64> = comp.log_var.iter().map(|lv| (0.5 * lv).exp()).collect();
    let n = alphas.len();
    let mut raw = Vec::with_capacity(n * moving);
    for &a in alphas {
        match mode {
            TraversalMode::SingleZuDim(k) => {
                let mut z = ep.z1.clone();
                z[k] = a;
                raw.extend(z);
            }
            _ => raw.extend(ep.z1.iter().zip(&ep.z2).map(|(x1, x2)| a * x1 + (1.0 - a) * x2)),
        }
    }
    let raw = Tensor::from_vec(n, moving, raw);
    let fixed = Tensor::from_vec(n, fixed_dim, ep.fixed.repeat(n));
    let (z_s, z_u) = match mode {
        TraversalMode::VaryZs => {
            let mut zs = raw.clone();
            for r in 0..n {
                for j in 0..ds {
                    zs.set(r, j, raw.get(r, j) * sigma[j] + comp.mu[j]);
                }
            }
            (zs, fixed)
        }
        _ => (fixed, raw.clone()),
    };
    let outputs = decoder_forward(params, &z_s, &z_u)?;
    Ok(Traversal {
        alphas: alphas.to_vec(),
        raw,
        z_s,
        z_u,
        outputs,
    })
}

/// Evenly spaced grid of `n` values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `decoder(encoder_s(x), mean of q(z_u | x))`.
pub fn reconstruct(params: &NetworkParams, x: &Tensor) -> Result<Tensor> {
    synthesize_swap(params, x, x)
}

/// Decodes the specified code of `x_a` with the unspecified code (posterior
/// mean) of `x_b`, row by row.
pub fn synthesize_swap(params: &NetworkParams, x_a: &Tensor, x_b: &Tensor) -> Result<Tensor> {
    if x_a.shape() != x_b.shape() {
        return Err(Error::Shape(format!(
            "swap inputs differ in shape: {:?} vs {:?}",
            x_a.shape(),
            x_b.shape()
        )));
    }
    if x_a.cols() != params.data_dim() {
        return Err(Error::Dimension {
            expected: params.data_dim(),
            got: x_a.cols(),
        });
    }
    let zs = encoder_s_forward(params, x_a)?;
    let (mu_u, _) = encoder_u_forward(params, x_b)?;
    decoder_forward(params, &zs, &mu_u)
}

/// Fills the masked entries (`mask == 1`) of `x` from the reconstruction of
/// the corrupted input; unmasked entries are copied unchanged.
pub fn inpaint(params: &NetworkParams, x: &Tensor, mask: &Tensor) -> Result<Tensor> {
    if x.shape() != mask.shape() {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match input {:?}",
            mask.shape(),
            x.shape()
        )));
    }
    if let Some(v) = mask.data().iter().find(|&&m| m != 0.0 && m != 1.0) {
        return Err(Error::InvalidArgument(format!("mask must be binary, found {v}")));
    }
    let corrupted = x.zip_map(mask, |v, m| if m == 1.0 { 0.0 } else { v });
    let x_prime = reconstruct(params, &corrupted)?;
    let mut out = x.clone();
    for (i, (o, m)) in out.data_mut().iter_mut().zip(mask.data()).enumerate() {
        if *m == 1.0 {
            *o = x_prime.data()[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_toy_dataset;
    use crate::models::build_networks;
    use crate::training::TrainConfig;

    fn net(seed: u64) -> NetworkParams {
        build_networks(&TrainConfig::toy(), &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn score_of_certain_identical_predictions_is_one() {
        let p = Tensor::from_rows(&vec![vec![1.0, 0.0, 0.0]; 10]);
        assert!((classifier_score_from_probs(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_of_confident_balanced_predictions_is_c() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let mut r = vec![0.0; 3];
                r[i % 3] = 1.0;
                r
            })
            .collect();
        let s = classifier_score_from_probs(&Tensor::from_rows(&rows)).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn score_stays_in_range_and_matches_direct_oracle() {
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..15)
                .map(|_| {
                    let e: Vec<f64> = (0..4).map(|_| (2.0 * rng.normal()).exp()).collect();
                    let z: f64 = e.iter().sum();
                    e.iter().map(|v| v / z).collect()
                })
                .collect();
            let s = classifier_score_from_probs(&Tensor::from_rows(&rows)).unwrap();
            assert!((1.0 - 1e-12..=4.0 + 1e-12).contains(&s));
            // I(y; x) = H(y) - E H(y|x)
            let py: Vec<f64> = (0..4).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / 15.0).collect();
            let h_y: f64 = -py.iter().map(|p| p * p.ln()).sum::<f64>();
            let h_cond: f64 = -rows.iter().map(|r| r.iter().map(|p| p * p.ln()).sum::<f64>()).sum::<f64>() / 15.0;
            assert!((s.ln() - (h_y - h_cond)).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_learns_toy_classes_and_guards_scoring() {
        let train = generate_toy_dataset(300, 1).unwrap();
        let held = generate_toy_dataset(200, 2).unwrap();
        let oracle = OracleClassifier::train(&train, &held, &OracleOptions::default()).unwrap();
        assert!(oracle.held_out_accuracy >= 0.98, "{}", oracle.held_out_accuracy);
        let s = classifier_score(&held.x, &oracle).unwrap();
        assert!(s > 2.7 && s <= 3.0, "{s}");

        let weak = OracleClassifier {
            min_accuracy: 1.1,
            ..oracle
        };
        assert!(matches!(classifier_score(&held.x, &weak), Err(Error::OracleAccuracy { .. })));
    }

    #[test]
    fn diversity_examples() {
        let k = RbfKernel::new(1.0).unwrap();
        let same = Tensor::from_rows(&vec![vec![0.5, -1.0]; 6]);
        assert_eq!(intra_class_diversity(&same, |a, b| k.eval(a, b)).unwrap(), 0.0);
        let far = Tensor::from_rows(&[vec![0.0, 0.0], vec![1e3, 0.0]]);
        assert_eq!(intra_class_diversity(&far, |a, b| k.eval(a, b)).unwrap(), 0.5);
        assert!(intra_class_diversity(&Tensor::row(&[1.0, 2.0]), |a, b| k.eval(a, b)).is_err());
    }

    #[test]
    fn diversity_matches_double_loop() {
        let mut rng = SeededRng::new(5);
        let x = rng.normal_tensor(40, 2);
        let k = RbfKernel::median_bandwidth(&x).unwrap();
        let mut s = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let d2: f64 = (0..2).map(|c| (x.get(i, c) - x.get(j, c)).powi(2)).sum();
                s += (-d2 / (2.0 * k.bandwidth * k.bandwidth)).exp();
            }
        }
        let d = intra_class_diversity(&x, |a, b| k.eval(a, b)).unwrap();
        assert!((d - (1.0 - s / 1600.0)).abs() < 1e-12);
        assert!((0.0..1.0).contains(&d));
    }

    #[test]
    fn median_bandwidth_of_a_line() {
        let x = Tensor::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]);
        // distances 1, 3, 2
        assert_eq!(RbfKernel::median_bandwidth(&x).unwrap().bandwidth, 2.0);
    }

    #[test]
    fn nn_distances() {
        let a = Tensor::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]);
        let b = Tensor::from_rows(&[vec![0.0, 1.0]]);
        assert!((mean_nn_distance(&a, &b).unwrap() - (1.0 + 18f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(internal_nn_distance(&a).unwrap(), 5.0);
    }

    #[test]
    fn traversal_endpoints_midpoint_and_determinism() {
        let p = net(1);
        let alphas = linspace(0.0, 1.0, 9);
        let t = latent_traversal(&p, 1, &alphas, TraversalMode::VaryZs, &mut SeededRng::new(7)).unwrap();
        assert_eq!(t.outputs.shape(), &[9, 2]);
        let t2 = latent_traversal(&p, 1, &alphas, TraversalMode::VaryZs, &mut SeededRng::new(7)).unwrap();
        assert_eq!(t, t2);

        let ep = Endpoints {
            z1: vec![1.0, -2.0],
            z2: vec![0.5, 4.0],
            fixed: vec![0.3, 0.1],
        };
        let t = traverse_from(&p, 2, &ep, &[1.0, 0.5, 0.0], TraversalMode::VaryZs).unwrap();
        assert_eq!(t.raw.row_slice(0), &ep.z1[..]);
        assert_eq!(t.raw.row_slice(1), &[0.75, 1.0]);
        assert_eq!(t.raw.row_slice(2), &ep.z2[..]);
        let comp = p.mixture.component(2);
        let map = |z: &[f64]| -> Tensor {
            let v: Vec<f64> = (0..2).map(|j| z[j] * (0.5 * comp.log_var[j]).exp() + comp.mu[j]).collect();
            Tensor::row(&v)
        };
        let fixed = Tensor::row(&ep.fixed);
        assert_eq!(t.outputs.row_slice(0), decoder_forward(&p, &map(&ep.z1), &fixed).unwrap().data());
        assert_eq!(t.outputs.row_slice(2), decoder_forward(&p, &map(&ep.z2), &fixed).unwrap().data());

        let flat = Endpoints {
            z2: ep.z1.clone(),
            ..ep.clone()
        };
        let t = traverse_from(&p, 0, &flat, &alphas, TraversalMode::VaryZu).unwrap();
        for r in 1..9 {
            assert_eq!(t.outputs.row_slice(r), t.outputs.row_slice(0));
        }
        assert!(latent_traversal(&p, 3, &alphas, TraversalMode::VaryZs, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn single_dim_sweep_changes_only_that_coordinate() {
        let p = net(2);
        let t = latent_traversal(&p, 0, &[-2.0, 0.0, 2.0], TraversalMode::SingleZuDim(1), &mut SeededRng::new(3))
            .unwrap();
        for r in 0..3 {
            assert_eq!(t.z_u.get(r, 0), t.z_u.get(0, 0));
            assert_eq!(t.z_s.row_slice(r), t.z_s.row_slice(0));
        }
        assert_eq!(t.z_u.get(2, 1), 2.0);
        assert!("zu-dim-5".parse::<TraversalMode>().is_ok());
        assert!("sideways".parse::<TraversalMode>().is_err());
        let bad = traverse_from(
            &p,
            0,
            &Endpoints {
                z1: vec![0.0; 2],
                z2: vec![0.0; 2],
                fixed: vec![0.0; 2],
            },
            &[0.0],
            TraversalMode::SingleZuDim(2),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn swap_degenerates_to_reconstruction_and_is_not_symmetric() {
        let p = net(3);
        let ds = generate_toy_dataset(5, 1).unwrap();
        let a = ds.x.select_rows(&[0, 1]);
        let b = ds.x.select_rows(&[10, 12]);
        assert_eq!(synthesize_swap(&p, &a, &a).unwrap(), reconstruct(&p, &a).unwrap());
        assert_ne!(synthesize_swap(&p, &a, &b).unwrap(), synthesize_swap(&p, &b, &a).unwrap());
        assert!(synthesize_swap(&p, &a, &ds.x).is_err());
    }

    #[test]
    fn inpaint_composition_rules() {
        let p = net(4);
        let x = generate_toy_dataset(4, 2).unwrap().x;
        let zeros = x.zeros_like();
        assert_eq!(inpaint(&p, &x, &zeros).unwrap(), x);
        let ones = x.map(|_| 1.0);
        assert_eq!(inpaint(&p, &x, &ones).unwrap(), reconstruct(&p, &x.zeros_like()).unwrap());
        let mut mixed = x.zeros_like();
        for r in 0..x.rows() {
            mixed.set(r, r % 2, 1.0);
        }
        let out = inpaint(&p, &x, &mixed).unwrap();
        for r in 0..x.rows() {
            let keep = 1 - r % 2;
            assert_eq!(out.get(r, keep).to_bits(), x.get(r, keep).to_bits());
        }
        let half = x.map(|_| 0.5);
        assert!(inpaint(&p, &x, &half).is_err());
        assert!(inpaint(&p, &x, &Tensor::zeros(1, 2)).is_err());
    }

    #[test]
    fn generation_shapes() {
        let p = net(5);
        let ds = generate_per_class(&p, 7, &mut SeededRng::new(1)).unwrap();
        assert_eq!(ds.len(), 21);
        assert_eq!(ds.labels[7], 1);
        assert!(p.generate(&[3], &mut SeededRng::new(1)).is_err());
    }
}
