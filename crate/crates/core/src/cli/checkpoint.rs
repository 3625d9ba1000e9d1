//! Versioned checkpoint files.
//!
//! A checkpoint is a UTF-8 header followed by a little-endian `f64`
//! payload:
//!
//! ```text
//! DISVAE1
//! model disentangled
//! epoch 25
//! rng <seed hex> <stream> <word position>
//! config <n>
//! ...n lines of TOML...
//! history <n>
//! ...n lines: <epoch> <11 loss values as hex bits>...
//! snapshot <epoch> <file name>
//! adam <group> <step> <lr multiplier bits>
//! tensor <name> <rows> <cols>
//! end-header <payload bytes>
//! <payload>
//! ```
//!
//! Tensors are the model parameters followed by each optimizer group's
//! first and second moments (`adam.<group>.m.<i>`, `adam.<group>.v.<i>`),
//! in header order. Floats in the header are stored as raw bits so a
//! resumed run continues bit-exactly.

use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::models::build_networks;
use crate::rng::{RngState, SeededRng};
use crate::training::{build_baseline, AdamState, EpochRecord, Mode, Model, Optimizers, TrainConfig, TrainHistory, Trainer};

pub const VERSION: &str = "DISVAE1";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub optim: Optimizers,
    pub rng: RngState,
    pub epoch: usize,
    /// Losses only; wall-clock times are not stored.
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        Self {
            config: t.config.clone(),
            model: t.model.clone(),
            optim: t.optim.clone(),
            rng: t.rng.state(),
            epoch: t.epoch,
            history: t.history.clone(),
        }
    }

    pub fn into_trainer(self) -> Trainer {
        Trainer {
            config: self.config,
            model: self.model,
            optim: self.optim,
            rng: SeededRng::from_state(&self.rng),
            epoch: self.epoch,
            history: self.history,
        }
    }

    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.model.named_tensors();
        for (group, st) in &self.optim {
            for (i, m) in st.m.iter().enumerate() {
                out.push((format!("adam.{group}.m.{i}"), m));
            }
            for (i, v) in st.v.iter().enumerate() {
                out.push((format!("adam.{group}.v.{i}"), v));
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = self.model.named_tensors_mut();
        for (group, st) in self.optim.iter_mut() {
            for (i, m) in st.m.iter_mut().enumerate() {
                out.push((format!("adam.{group}.m.{i}"), m));
            }
            for (i, v) in st.v.iter_mut().enumerate() {
                out.push((format!("adam.{group}.v.{i}"), v));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut h = String::new();
        h.push_str(VERSION);
        h.push('\n');
        let kind = match self.model {
            Model::Disentangled(_) => "disentangled",
            Model::Baseline(_) => "baseline",
        };
        h.push_str(&format!("model {kind}\nepoch {}\n", self.epoch));
        h.push_str(&format!(
            "rng {} {} {}\n",
            to_hex(&self.rng.seed),
            self.rng.stream,
            self.rng.word_pos
        ));
        let cfg = toml::to_string(&self.config).map_err(|e| Error::Config(e.to_string()))?;
        h.push_str(&format!("config {}\n{cfg}", cfg.lines().count()));
        if !cfg.ends_with('\n') {
            h.push('\n');
        }
        h.push_str(&format!("history {}\n", self.history.epochs.len()));
        for e in &self.history.epochs {
            h.push_str(&e.epoch.to_string());
            for v in e.losses.values().iter().chain([&e.stage_gm_loss]) {
                h.push_str(&format!(" {:016x}", v.to_bits()));
            }
            h.push('\n');
        }
        for (epoch, name) in &self.history.snapshots {
            h.push_str(&format!("snapshot {epoch} {name}\n"));
        }
        for (group, st) in &self.optim {
            h.push_str(&format!("adam {group} {} {:016x}\n", st.step, st.lr_multiplier.to_bits()));
        }
        let tensors = self.tensors();
        let mut payload = Vec::new();
        for (name, t) in &tensors {
            h.push_str(&format!("tensor {name} {} {}\n", t.rows(), t.cols()));
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        h.push_str(&format!("end-header {}\n", payload.len()));
        let mut out = h.into_bytes();
        out.extend(payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = HeaderReader { bytes, pos: 0 };
        let version = r.line("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version.chars().take(32).collect(),
                expected: VERSION,
            });
        }
        let kind = r.keyed("model")?;
        let epoch: usize = parse_field("epoch", &r.keyed("epoch")?)?;
        let rng_line = r.keyed("rng")?;
        let parts: Vec<&str> = rng_line.split(' ').collect();
        if parts.len() != 3 {
            return Err(bad("rng", "expected seed, stream and word position"));
        }
        let seed_bytes = from_hex(parts[0]).ok_or_else(|| bad("rng", "seed is not hex"))?;
        let seed: [u8; 32] = seed_bytes.try_into().map_err(|_| bad("rng", "seed must be 32 bytes"))?;
        let rng = RngState {
            seed,
            stream: parse_field("rng", parts[1])?,
            word_pos: parse_field("rng", parts[2])?,
        };

        let n_cfg: usize = parse_field("config", &r.keyed("config")?)?;
        let mut cfg_text = String::new();
        for _ in 0..n_cfg {
            cfg_text.push_str(&r.line("config")?);
            cfg_text.push('\n');
        }
        let config: TrainConfig = toml::from_str(&cfg_text).map_err(|e| bad("config", e.message()))?;
        config.validate().map_err(|e| bad("config", &e.to_string()))?;

        let n_hist: usize = parse_field("history", &r.keyed("history")?)?;
        let mut history = TrainHistory {
            seed: config.seed,
            ..Default::default()
        };
        for _ in 0..n_hist {
            let line = r.line("history")?;
            let mut it = line.split(' ');
            let ep: usize = parse_field("history", it.next().unwrap_or(""))?;
            let vals: Vec<f64> = it
                .map(|s| u64::from_str_radix(s, 16).map(f64::from_bits))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("history", "loss values must be hex bits"))?;
            if vals.len() != 11 {
                return Err(bad("history", "expected 11 values per epoch"));
            }
            history.epochs.push(EpochRecord {
                epoch: ep,
                losses: LossBreakdown::from_values(&vals[..10]).expect("ten values"),
                stage_gm_loss: vals[10],
                wall_secs: 0.0,
            });
        }

        let model = match kind.as_str() {
            "disentangled" => Model::Disentangled(build_networks(&config, &mut SeededRng::new(0))?),
            "baseline" => {
                if config.mode != Mode::BaselineCvaegan {
                    return Err(bad("model", "baseline parameters with a non-baseline mode"));
                }
                Model::Baseline(build_baseline(&config, &mut SeededRng::new(0))?)
            }
            other => return Err(bad("model", &format!("unknown model kind `{other}`"))),
        };
        let mut optim = match &model {
            Model::Disentangled(p) => crate::training::init_optimizers(p),
            Model::Baseline(p) => p.init_optimizers(),
        };

        let mut line = r.line("adam")?;
        while let Some(rest) = line.strip_prefix("snapshot ") {
            let (ep, name) = rest.split_once(' ').ok_or_else(|| bad("snapshot", "expected epoch and name"))?;
            history.snapshots.push((parse_field("snapshot", ep)?, name.to_string()));
            line = r.line("adam")?;
        }
        for _ in 0..optim.len() {
            let rest = line
                .strip_prefix("adam ")
                .ok_or_else(|| bad("adam", &format!("expected optimizer group, found `{}`", clip(&line))))?;
            let parts: Vec<&str> = rest.split(' ').collect();
            if parts.len() != 3 {
                return Err(bad("adam", "expected group, step and multiplier"));
            }
            let st: &mut AdamState = optim
                .get_mut(parts[0])
                .ok_or_else(|| bad("adam", &format!("unknown group `{}`", parts[0])))?;
            st.step = parse_field("adam", parts[1])?;
            st.lr_multiplier = f64::from_bits(
                u64::from_str_radix(parts[2], 16).map_err(|_| bad("adam", "multiplier must be hex bits"))?,
            );
            line = r.line("tensor")?;
        }

        let mut ck = Checkpoint {
            config,
            model,
            optim,
            rng,
            epoch,
            history,
        };

        let mut shapes = Vec::new();
        for (name, t) in ck.tensors() {
            let rest = line
                .strip_prefix("tensor ")
                .ok_or_else(|| bad(&name, &format!("expected tensor header, found `{}`", clip(&line))))?;
            let expected = format!("{name} {} {}", t.rows(), t.cols());
            if rest != expected {
                return Err(bad(&name, &format!("header `{}` does not match expected `{expected}`", clip(rest))));
            }
            shapes.push(t.len());
            line = r.line("end-header")?;
        }
        let declared: usize = line
            .strip_prefix("end-header ")
            .ok_or_else(|| bad("end-header", &format!("unexpected line `{}`", clip(&line))))
            .and_then(|s| parse_field("end-header", s))?;
        let needed: usize = shapes.iter().sum::<usize>() * 8;
        if declared != needed {
            return Err(bad("end-header", &format!("declares {declared} payload bytes, tensors need {needed}")));
        }
        let payload = &bytes[r.pos..];
        if payload.len() != needed {
            return Err(bad(
                "payload",
                &format!("expected {needed} bytes, found {}", payload.len()),
            ));
        }
        let mut chunks = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for (_, t) in ck.tensors_mut() {
            for v in t.data_mut() {
                *v = chunks.next().expect("length checked");
            }
        }
        Ok(ck)
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn line(&mut self, field: &str) -> Result<String> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .take(1 << 16)
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad(field, "file ends inside the header"))?;
        let s = std::str::from_utf8(&rest[..end]).map_err(|_| bad(field, "header is not UTF-8"))?;
        self.pos += end + 1;
        Ok(s.to_string())
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.line(key)?;
        l.strip_prefix(key)
            .and_then(|s| s.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(key, &format!("expected `{key} ...`, found `{}`", clip(&l))))
    }
}

fn bad(field: &str, msg: &str) -> Error {
    Error::Checkpoint {
        field: field.to_string(),
        msg: msg.to_string(),
    }
}

fn clip(s: &str) -> String {
    s.chars().take(60).collect()
}

fn parse_field<T: std::str::FromStr>(field: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(field, &format!("cannot parse `{}`", clip(s))))
}

fn to_hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn from_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    super::write_atomic(path, &ck.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
