//! Stops a run halfway, writes a checkpoint, reloads it and finishes; the
//! result matches an uninterrupted run bit for bit.
//!
//! ```text
//! cargo run --release --example checkpoint_resume
//! ```

use disvae::cli::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use disvae::data::generate_toy_dataset;
use disvae::training::{TrainConfig, Trainer};

fn main() -> disvae::Result<()> {
    let ds = generate_toy_dataset(200, 3)?;
    let cfg = TrainConfig { epochs: 6, seed: 3, ..TrainConfig::toy() };

    let mut straight = Trainer::new(&cfg)?;
    straight.run(&ds)?;

    let path = std::env::temp_dir().join(format!("disvae-half-{}.ckpt", std::process::id()));
    let mut first = Trainer::new(&cfg)?;
    for _ in 0..3 {
        first.run_epoch(&ds)?;
    }
    save_checkpoint(&path, &Checkpoint::from_trainer(&first))?;
    drop(first);
    let mut resumed = load_checkpoint(&path)?.into_trainer();
    println!("resumed at epoch {} from {}", resumed.epoch, path.display());
    resumed.run(&ds)?;

    for (a, b) in straight.history.epochs.iter().zip(&resumed.history.epochs) {
        println!("epoch {}: l_rec {:.6} vs {:.6}", a.epoch, a.losses.l_rec, b.losses.l_rec);
    }
    println!("parameters identical: {}", straight.model == resumed.model);
    let _ = std::fs::remove_file(&path);
    Ok(())
}
