//! Toy dataset synthesis, CSV persistence and batching.
//!
//! CSV layout: an optional `# classes = C` comment, an optional header row,
//! then one row per sample with the features followed by the integer label
//! (`-1` for unlabeled samples). Values are written with 17 significant
//! digits so a save/load round trip is exact.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const UNLABELED: i64 = -1;

/// Horizontal distance between consecutive half circles.
pub const TOY_SPACING: f64 = 2.2;
pub const TOY_NOISE_STD: f64 = 0.15;
/// Vertical offset of the downward-facing (odd) half circles. Shifting them
/// down keeps adjacent arc ends apart, so the classes stay separable at the
/// default noise level.
pub const TOY_ODD_OFFSET: f64 = -0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub labels: Vec<i64>,
    pub classes: usize,
}

/// A slice of a dataset, as fed to one training step.
#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor,
    pub labels: Vec<i64>,
}

impl Batch {
    /// Labels as class indices; fails on unlabeled rows.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|&y| {
                usize::try_from(y).map_err(|_| Error::InvalidArgument("batch contains unlabeled rows".into()))
            })
            .collect()
    }
}

impl Dataset {
    pub fn new(x: Tensor, labels: Vec<i64>, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.rows() != labels.len() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y != UNLABELED && (y < 0 || y as usize >= classes)) {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        if !x.all_finite() {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Self { x, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        Batch {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn all(&self) -> Batch {
        Batch {
            x: self.x.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Indices of rows with the given label.
    pub fn indices_of(&self, label: i64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let b = self.batch(idx);
        Self::new(b.x, b.labels, self.classes)
    }

    /// Same points with every label set to unlabeled.
    pub fn without_labels(&self) -> Self {
        Self {
            x: self.x.clone(),
            labels: vec![UNLABELED; self.len()],
            classes: self.classes,
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut data = self.x.data().to_vec();
        data.extend_from_slice(other.x.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(
            Tensor::from_vec(labels.len(), self.dim(), data),
            labels,
            self.classes.max(other.classes),
        )
    }
}

/// Parameters of the three-half-circle toy distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyOptions {
    pub n_per_class: usize,
    pub noise_std: f64,
    /// Angular range `[lo, hi]` within `[0, pi]` the arc positions are drawn from.
    pub arc: (f64, f64),
    pub classes: usize,
}

impl ToyOptions {
    pub fn new(n_per_class: usize) -> Self {
        Self {
            n_per_class,
            noise_std: TOY_NOISE_STD,
            arc: (0.0, std::f64::consts::PI),
            classes: 3,
        }
    }
}

/// Noiseless point of class `c` at arc angle `t`. Even classes are upper
/// half circles centered at `(2.2 c, 0)`; odd classes are lower half
/// circles centered at `(2.2 c, -0.5)`.
pub fn toy_curve(c: usize, t: f64) -> [f64; 2] {
    let x = t.cos() + TOY_SPACING * c as f64;
    if c % 2 == 0 {
        [x, t.sin()]
    } else {
        [x, -t.sin() + TOY_ODD_OFFSET]
    }
}

pub fn generate_toy(opts: &ToyOptions, seed: u64) -> Result<Dataset> {
    if opts.n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be >= 1".into()));
    }
    let (lo, hi) = opts.arc;
    if !(0.0..=std::f64::consts::PI).contains(&lo) || !(lo..=std::f64::consts::PI).contains(&hi) {
        return Err(Error::InvalidArgument(format!("arc {:?} not within [0, pi]", opts.arc)));
    }
    let mut rng = SeededRng::new(seed);
    let n = opts.n_per_class * opts.classes;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..opts.classes {
        for _ in 0..opts.n_per_class {
            let t = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let [px, py] = toy_curve(c, t);
            data.push(px + opts.noise_std * rng.normal());
            data.push(py + opts.noise_std * rng.normal());
            labels.push(c as i64);
        }
    }
    Dataset::new(Tensor::from_vec(n, 2, data), labels, opts.classes)
}

/// Three noisy half circles, `n_per_class` points each.
pub fn generate_toy_dataset(n_per_class: usize, seed: u64) -> Result<Dataset> {
    generate_toy(&ToyOptions::new(n_per_class), seed)
}

/// Shuffled partition of the dataset into batches, determined by
/// `(seed, epoch)`. The last batch may be short.
pub fn batch_iter(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::derived(seed ^ 0x5eed_ba7c, epoch);
    idx.shuffle(&mut rng);
    idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    crate::cli::write_atomic(path, to_csv(ds).as_bytes())
}

pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# classes = {}", ds.classes);
    let header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    let _ = writeln!(out, "{},label", header.join(","));
    for i in 0..ds.len() {
        for v in ds.x.row_slice(i) {
            let _ = write!(out, "{v:.16e},");
        }
        let _ = writeln!(out, "{}", ds.labels[i]);
    }
    out
}

/// Reads a dataset; `classes` overrides the `# classes` comment, and
/// falls back to `max label + 1`.
pub fn load_dataset(path: &Path, classes: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path, classes)
}

pub fn parse_csv(text: &str, path: &Path, classes: Option<usize>) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut declared = None;
    let mut dim = None;
    let mut data = Vec::new();
    let mut rows: Vec<(usize, i64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                if k.trim() == "classes" {
                    declared = Some(
                        v.trim()
                            .parse::<usize>()
                            .map_err(|e| err(lineno, format!("bad class count: {e}")))?,
                    );
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && dim.is_none() && fields[0].parse::<f64>().is_err() {
            // header row
            continue;
        }
        if fields.len() < 2 {
            return Err(err(lineno, "need at least one feature and a label".into()));
        }
        let d = fields.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(err(lineno, format!("expected {expected} features, found {d}")));
            }
            _ => {}
        }
        for f in &fields[..d] {
            let v: f64 = f.parse().map_err(|_| err(lineno, format!("bad number `{f}`")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value `{f}`")));
            }
            data.push(v);
        }
        let label: i64 = fields[d]
            .parse()
            .map_err(|_| err(lineno, format!("bad label `{}`", fields[d])))?;
        rows.push((lineno, label));
    }
    let dim = dim.ok_or(Error::EmptyDataset)?;
    let max_label = rows.iter().map(|r| r.1).max().unwrap_or(-1);
    let classes = classes.or(declared).unwrap_or((max_label + 1).max(1) as usize);
    for &(lineno, y) in &rows {
        if y != UNLABELED && (y < 0 || y as usize >= classes) {
            return Err(err(lineno, format!("label {y} out of range for {classes} classes")));
        }
    }
    let labels = rows.into_iter().map(|r| r.1).collect::<Vec<_>>();
    Dataset::new(Tensor::from_vec(labels.len(), dim, data), labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn noiseless_class_zero_lies_on_the_unit_half_circle() {
        let mut opts = ToyOptions::new(500);
        opts.noise_std = 0.0;
        let ds = generate_toy(&opts, 1).unwrap();
        for i in ds.indices_of(0) {
            let (x, y) = (ds.x.get(i, 0), ds.x.get(i, 1));
            assert!((x * x + y * y - 1.0).abs() < 1e-12);
            assert!(y >= 0.0);
        }
        for i in ds.indices_of(1) {
            let (x, y) = (ds.x.get(i, 0) - 2.2, ds.x.get(i, 1) - TOY_ODD_OFFSET);
            assert!((x * x + y * y - 1.0).abs() < 1e-12);
            assert!(y <= 0.0);
        }
    }

    #[test]
    fn class_means_are_spaced_by_the_interval() {
        let ds = generate_toy_dataset(100_000, 3).unwrap();
        let means: Vec<f64> = (0..3)
            .map(|c| {
                let idx = ds.indices_of(c);
                idx.iter().map(|&i| ds.x.get(i, 0)).sum::<f64>() / idx.len() as f64
            })
            .collect();
        assert!(means[0] < means[1] && means[1] < means[2]);
        for w in means.windows(2) {
            assert!((w[1] - w[0] - 2.2).abs() < 0.05, "{means:?}");
        }
    }

    #[test]
    fn noise_residual_std() {
        // regenerate with the same stream to recover each point's angle
        let n = 100_000;
        let seed = 9;
        let ds = generate_toy(&ToyOptions { classes: 1, ..ToyOptions::new(n) }, seed).unwrap();
        let mut rng = SeededRng::new(seed);
        let mut sq = 0.0;
        for i in 0..n {
            let t: f64 = rng.random_range(0.0..PI);
            let _ = (rng.normal(), rng.normal());
            let [cx, cy] = toy_curve(0, t);
            sq += (ds.x.get(i, 0) - cx).powi(2) + (ds.x.get(i, 1) - cy).powi(2);
        }
        let std = (sq / (2 * n) as f64).sqrt();
        assert!((0.148..=0.152).contains(&std), "{std}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = SeededRng::new(4);
        let x = rng.normal_tensor(100, 2).map(|v| v * 1e3 / 7.0);
        let labels: Vec<i64> = (0..100).map(|i| (i % 4) as i64 - 1).collect();
        let ds = Dataset::new(x, labels, 3).unwrap();
        let back = parse_csv(&to_csv(&ds), Path::new("mem.csv"), None).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.labels.iter().filter(|&&y| y == UNLABELED).count(), 25);
    }

    #[test]
    fn out_of_range_label_reports_the_line() {
        let text = "# classes = 3\nx0,x1,label\n0.5,1.0,2\n0.1,0.2,7\n";
        let err = parse_csv(text, Path::new("bad.csv"), None).unwrap_err().to_string();
        assert!(err.contains("bad.csv:4"), "{err}");
        let err = parse_csv("1,2,0\n1,0\n", Path::new("d.csv"), None).unwrap_err().to_string();
        assert!(err.contains(":2"), "{err}");
        assert!(parse_csv("1,abc,0\n", Path::new("d.csv"), None).is_err());
    }

    #[test]
    fn batches_partition_the_dataset() {
        let b = batch_iter(10, 4, 7, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b, batch_iter(10, 4, 7, 0));
        assert_ne!(b, batch_iter(10, 4, 7, 1));
        let mut all: Vec<usize> = b.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(Tensor::zeros(2, 2), vec![0, 3], 3).is_err());
        assert!(Dataset::new(Tensor::zeros(2, 2), vec![0], 3).is_err());
        assert!(Dataset::new(Tensor::zeros(2, 2), vec![-1, 2], 3).is_ok());
        assert!(Dataset::new(Tensor::zeros(1, 2), vec![-2], 3).is_err());
    }
}
