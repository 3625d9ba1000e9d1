//! Command-line front end: `gen-data`, `train`, `finetune`, `eval`,
//! `traverse`, `inpaint` and `plot`.
//!
//! Every subcommand reads an optional TOML run configuration
//! ([`config`]) and lets flags override it. Output files are written
//! atomically. Usage errors exit with status 2, failed runs with 1.

pub mod checkpoint;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::data::{generate_toy, load_dataset, save_dataset, Dataset, ToyOptions};
use crate::error::{Error, Result};
use crate::eval::{
    classifier_score, generate_per_class, inpaint, intra_class_diversity, latent_traversal, linspace,
    mean_nn_distance, subsample, Generator, OracleClassifier, OracleOptions, RbfKernel, TraversalMode,
};
use crate::rng::SeededRng;
use crate::training::{Mode, Model, Trainer};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{load_config, parse_config, RunConfig};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent).map_err(|e| crate::Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| crate::Error::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| crate::Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| crate::Error::io(path, e))?;
    tmp.persist(path).map_err(|e| crate::Error::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Parser, Debug)]
#[command(name = "disvae", version, about = "Disentangled VAE-GAN on toy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Training mode: full, semisupervised-finetune or baseline-cvaegan.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the three-half-circle toy dataset as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes final.ckpt, history.csv and snapshots to --out.
    Train {
        #[command(flatten)]
        common: Common,
        /// Labeled training CSV; the toy generator is used when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Resume from this checkpoint. Pass the same --data (or the same
        /// --seed for generated data) as the original run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finetune a trained model on unlabeled data.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV whose labels, if any, are ignored.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generated samples against real data; writes a metrics CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Labeled real data, used to train the oracle and as reference.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a latent traversal; writes a CSV of codes and outputs.
    Traverse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        class: usize,
        /// vary-zs, vary-zu or zu-dim-<k>.
        #[arg(long, default_value = "vary-zs")]
        kind: TraversalMode,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        /// Sweep range for zu-dim-<k>; interpolation modes use [0, 1].
        #[arg(long, default_value_t = 3.0)]
        range: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill masked coordinates of each row from the model's reconstruction.
    Inpaint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated coordinates to mask, e.g. `1`.
        #[arg(long, value_delimiter = ',', required = true)]
        mask: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scatter plot (SVG) of datasets and/or samples from a checkpoint.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.train.seed = s;
        cfg.data.seed = s;
        cfg.eval.seed = s;
    }
    if let Some(e) = common.epochs {
        cfg.train.epochs = e;
        cfg.train.finetune_epochs = e;
    }
    if let Some(m) = common.mode {
        cfg.train.mode = m;
    }
    cfg.train.validate()?;
    Ok(cfg)
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData {
            common,
            per_class,
            noise,
            out,
        } => {
            let cfg = run_config(&common)?;
            let mut opts = ToyOptions::new(per_class.unwrap_or(cfg.data.per_class));
            opts.noise_std = noise.unwrap_or(cfg.data.noise_std);
            opts.classes = cfg.train.classes;
            let ds = generate_toy(&opts, cfg.data.seed)?;
            save_dataset(&ds, &out)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
            Ok(())
        }
        Command::Train {
            common,
            data,
            checkpoint,
            out,
        } => cmd_train(&common, data.as_deref(), checkpoint.as_deref(), &out),
        Command::Finetune {
            common,
            checkpoint,
            data,
            out,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let Model::Disentangled(params) = ck.model else {
                return Err(Error::InvalidArgument("finetuning needs a disentangled model".into()));
            };
            let mut cfg = ck.config.clone();
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(e) = common.epochs {
                cfg.finetune_epochs = e;
            }
            let ds = load_dataset(&data, Some(cfg.classes))?;
            let mut t = Trainer::for_finetune(&cfg, params)?;
            let unlabeled = ds.without_labels();
            while !t.is_done() {
                let rec = t.run_epoch(&unlabeled)?;
                println!("finetune epoch {} l_rec {:.5} l_lkd {:.5}", rec.epoch, rec.losses.l_rec, rec.losses.l_lkd);
            }
            let path = out.join("finetuned.ckpt");
            let bytes = Checkpoint::from_trainer(&t).to_bytes()?;
            write_atomic(&path, &bytes)?;
            write_atomic(&out.join("history.csv"), t.history.to_csv().as_bytes())?;
            println!("checkpoint {} sha256 {}", path.display(), sha256_hex(&bytes));
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            data,
            per_class,
            out,
        } => {
            let cfg = run_config(&common)?;
            let ck = load_checkpoint(&checkpoint)?;
            let real = load_dataset(&data, Some(ck.config.classes))?;
            let csv = evaluate(&ck.model, &real, per_class.unwrap_or(cfg.eval.per_class), &cfg)?;
            write_atomic(&out, csv.as_bytes())?;
            print!("{csv}");
            Ok(())
        }
        Command::Traverse {
            common,
            checkpoint,
            class,
            kind,
            steps,
            range,
            out,
        } => {
            let cfg = run_config(&common)?;
            let ck = load_checkpoint(&checkpoint)?;
            let params = ck
                .model
                .disentangled()
                .ok_or_else(|| Error::InvalidArgument("traversals need a disentangled model".into()))?;
            let alphas = match kind {
                TraversalMode::SingleZuDim(_) => linspace(-range, range, steps),
                _ => linspace(0.0, 1.0, steps),
            };
            let mut rng = SeededRng::derived(cfg.eval.seed, 11);
            let t = latent_traversal(params, class, &alphas, kind, &mut rng)?;
            let mut csv = String::from("alpha");
            for j in 0..t.z_s.cols() {
                let _ = write!(csv, ",z_s{j}");
            }
            for j in 0..t.z_u.cols() {
                let _ = write!(csv, ",z_u{j}");
            }
            for j in 0..t.outputs.cols() {
                let _ = write!(csv, ",x{j}");
            }
            csv.push('\n');
            for (i, a) in t.alphas.iter().enumerate() {
                let _ = write!(csv, "{a}");
                for v in t.z_s.row_slice(i).iter().chain(t.z_u.row_slice(i)).chain(t.outputs.row_slice(i)) {
                    let _ = write!(csv, ",{v:.16e}");
                }
                csv.push('\n');
            }
            write_atomic(&out, csv.as_bytes())
        }
        Command::Inpaint {
            common: _,
            checkpoint,
            data,
            mask,
            out,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let params = ck
                .model
                .disentangled()
                .ok_or_else(|| Error::InvalidArgument("inpainting needs a disentangled model".into()))?;
            let ds = load_dataset(&data, Some(params.classes()))?;
            if let Some(&k) = mask.iter().find(|&&k| k >= ds.dim()) {
                return Err(Error::InvalidArgument(format!("mask coordinate {k} out of range for {}-d data", ds.dim())));
            }
            let mut m = ds.x.zeros_like();
            for r in 0..ds.len() {
                for &k in &mask {
                    m.set(r, k, 1.0);
                }
            }
            let filled = inpaint(params, &ds.x, &m)?;
            let result = Dataset::new(filled, ds.labels.clone(), ds.classes)?;
            save_dataset(&result, &out)
        }
        Command::Plot {
            common,
            data,
            checkpoint,
            per_class,
            out,
        } => {
            let cfg = run_config(&common)?;
            let mut panels: Vec<(String, Dataset)> = Vec::new();
            for p in &data {
                panels.push((p.display().to_string(), load_dataset(p, None)?));
            }
            if let Some(c) = &checkpoint {
                let ck = load_checkpoint(c)?;
                let n = per_class.or(cfg.plot.per_class).unwrap_or(300);
                let mut rng = SeededRng::derived(cfg.eval.seed, 13);
                let ds = generate_per_class(generator(&ck.model), n, &mut rng)?;
                panels.push((format!("samples, epoch {}", ck.epoch), ds));
            }
            if panels.is_empty() {
                return Err(Error::InvalidArgument("nothing to plot: pass --data and/or --checkpoint".into()));
            }
            let refs: Vec<(&str, &Dataset)> = panels.iter().map(|(t, d)| (t.as_str(), d)).collect();
            write_atomic(&out, plot::scatter_svg(&refs).as_bytes())
        }
    }
}

pub fn generator(model: &Model) -> &dyn Generator {
    match model {
        Model::Disentangled(p) => p,
        Model::Baseline(p) => p,
    }
}

fn cmd_train(common: &Common, data: Option<&Path>, resume: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = run_config(common)?;
    let mut trainer = match resume {
        Some(p) => {
            let mut t = load_checkpoint(p)?.into_trainer();
            if let Some(e) = common.epochs {
                t.config.epochs = e;
            }
            t
        }
        None => Trainer::new(&cfg.train)?,
    };
    let ds = match data {
        Some(p) => load_dataset(p, Some(trainer.config.classes))?,
        None => {
            let mut opts = ToyOptions::new(cfg.data.per_class);
            opts.noise_std = cfg.data.noise_std;
            opts.classes = trainer.config.classes;
            generate_toy(&opts, cfg.data.seed)?
        }
    };
    while !trainer.is_done() {
        let rec = trainer.run_epoch(&ds)?;
        println!(
            "epoch {:>3} l_rec {:.5} l_kl {:.5} l_gm {:.5} l_d {:.5} ({:.1}s)",
            rec.epoch, rec.losses.l_rec, rec.losses.l_kl, rec.losses.l_gm, rec.losses.l_d_adv, rec.wall_secs
        );
        let epoch = trainer.epoch;
        if cfg.plot.snapshot_epochs.contains(&epoch) {
            let name = format!("epoch-{epoch:03}");
            let mut rng = SeededRng::derived(cfg.eval.seed, 13);
            let n = cfg.plot.per_class.unwrap_or(300);
            let samples = generate_per_class(generator(&trainer.model), n, &mut rng)?;
            let svg = plot::scatter_svg(&[("real", &ds), (&format!("generated, epoch {epoch}"), &samples)]);
            write_atomic(&out.join(format!("{name}.svg")), svg.as_bytes())?;
            trainer.history.snapshots.push((epoch, format!("{name}.ckpt")));
            save_checkpoint(&out.join(format!("{name}.ckpt")), &Checkpoint::from_trainer(&trainer))?;
        }
    }
    let bytes = Checkpoint::from_trainer(&trainer).to_bytes()?;
    let path = out.join("final.ckpt");
    write_atomic(&path, &bytes)?;
    write_atomic(&out.join("history.csv"), trainer.history.to_csv().as_bytes())?;
    println!("checkpoint {} sha256 {}", path.display(), sha256_hex(&bytes));
    Ok(())
}

/// Metrics CSV (`metric,class,value`) for a model against real data.
pub fn evaluate(model: &Model, real: &Dataset, per_class: usize, cfg: &RunConfig) -> Result<String> {
    let classes = real.classes;
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..real.len()).partition(|i| i % 2 == 0);
    let opts = OracleOptions {
        epochs: cfg.eval.oracle_epochs,
        min_accuracy: cfg.eval.oracle_min_accuracy,
        seed: cfg.eval.seed,
        ..Default::default()
    };
    let oracle = OracleClassifier::train(&real.subset(&even)?, &real.subset(&odd)?, &opts)?;
    let mut rng = SeededRng::derived(cfg.eval.seed, 7);
    let gen = generate_per_class(generator(model), per_class, &mut rng)?;
    let mut csv = String::from("metric,class,value\n");
    let _ = writeln!(csv, "oracle_accuracy,all,{}", oracle.held_out_accuracy);
    let _ = writeln!(csv, "classifier_score,all,{}", classifier_score(&gen.x, &oracle)?);
    for c in 0..classes {
        let real_c = real.x.select_rows(&real.indices_of(c as i64));
        let gen_c = gen.x.select_rows(&gen.indices_of(c as i64));
        if real_c.rows() < 2 {
            continue;
        }
        let real_s = subsample(&real_c, 1000, &mut rng);
        let gen_s = subsample(&gen_c, 1000, &mut rng);
        let k = RbfKernel::median_bandwidth(&real_s)?;
        let _ = writeln!(csv, "diversity,{c},{}", intra_class_diversity(&gen_s, |a, b| k.eval(a, b))?);
        let _ = writeln!(csv, "real_diversity,{c},{}", intra_class_diversity(&real_s, |a, b| k.eval(a, b))?);
        let _ = writeln!(csv, "nn_distance,{c},{}", mean_nn_distance(&gen_s, &real_c)?);
    }
    Ok(csv)
}
