//! Run configuration files: TOML with one table per concern.
//!
//! ```toml
//! [model]
//! dim_z_s = 2
//! [train]
//! epochs = 50
//! seed = 3
//! [loss]
//! lambda_lkd = 0.1
//! [data]
//! per_class = 1000
//! [eval]
//! per_class = 1000
//! [plot]
//! snapshot_epochs = [1, 10, 50]
//! ```
//!
//! `[model]`, `[train]` and `[loss]` together form a [`TrainConfig`]; every
//! key is optional and unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::training::TrainConfig;

const MODEL_KEYS: &[&str] = &[
    "data_dim",
    "dim_z_s",
    "dim_z_u",
    "classes",
    "enc_hidden",
    "dec_hidden",
    "cls_hidden",
    "disc_hidden",
    "activation",
];
const LOSS_KEYS: &[&str] = &["lambda_lkd", "lambda_kl", "lambda_rec"];

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            per_class: 1000,
            noise_std: crate::data::TOY_NOISE_STD,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Generated points per class.
    pub per_class: usize,
    pub oracle_epochs: usize,
    pub oracle_min_accuracy: f64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            per_class: 1000,
            oracle_epochs: 40,
            oracle_min_accuracy: 0.98,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    /// Epochs after which a checkpoint and a scatter plot are written.
    pub snapshot_epochs: Vec<usize>,
    pub per_class: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataSection,
    pub eval: EvalSection,
    pub plot: PlotSection,
}

fn section<T: for<'de> Deserialize<'de>>(name: &str, v: toml::Value) -> Result<T> {
    v.try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{name}]: {}", e.message())))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut train = toml::Table::new();
    let mut out = RunConfig::default();
    for (name, value) in table {
        let toml::Value::Table(t) = value else {
            return Err(Error::Config(format!(
                "top-level key `{name}` must be a section such as [train]"
            )));
        };
        match name.as_str() {
            "model" | "train" | "loss" => {
                for (k, v) in t {
                    let allowed = match name.as_str() {
                        "model" => MODEL_KEYS.contains(&k.as_str()),
                        "loss" => LOSS_KEYS.contains(&k.as_str()),
                        _ => !MODEL_KEYS.contains(&k.as_str()) && !LOSS_KEYS.contains(&k.as_str()),
                    };
                    if !allowed {
                        return Err(Error::Config(format!("key `{k}` does not belong in [{name}]")));
                    }
                    train.insert(k, v);
                }
            }
            "data" => out.data = section(&name, toml::Value::Table(t))?,
            "eval" => out.eval = section(&name, toml::Value::Table(t))?,
            "plot" => out.plot = section(&name, toml::Value::Table(t))?,
            other => return Err(Error::Config(format!("unknown section [{other}]"))),
        }
    }
    out.train = section("model/train/loss", toml::Value::Table(train))?;
    out.train.validate()?;
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
