//! Trains on labeled points from most of each arc, then finetunes on
//! unlabeled points from the unseen arc ends.
//!
//! ```text
//! cargo run --release --example semi_supervised -- [seed] [epochs]
//! ```

use std::f64::consts::PI;

use disvae::data::{generate_toy, ToyOptions};
use disvae::eval::reconstruct;
use disvae::training::{finetune_semisupervised, train, TrainConfig};
use disvae::Tensor;

fn rec_loss(r: &Tensor, x: &Tensor) -> f64 {
    let sq: f64 = x.data().iter().zip(r.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * sq / x.rows() as f64
}

fn main() -> disvae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let split = 5.0 * PI / 6.0;

    let labeled = generate_toy(&ToyOptions { arc: (0.0, split), ..ToyOptions::new(1000) }, seed)?;
    let unlabeled = generate_toy(&ToyOptions { arc: (split, PI), ..ToyOptions::new(300) }, seed + 20_000)?;
    let cfg = TrainConfig { seed, epochs, ..TrainConfig::toy() };

    let (pre, _) = train(&cfg, &labeled)?;
    let (post, hist) = finetune_semisupervised(&pre, &unlabeled.without_labels(), &cfg)?;
    for e in &hist.epochs {
        println!("finetune epoch {:>2}: l_rec {:.4} l_lkd {:.4}", e.epoch, e.losses.l_rec, e.losses.l_lkd);
    }
    println!(
        "held-out reconstruction loss: {:.4} before, {:.4} after",
        rec_loss(&reconstruct(&pre, &unlabeled.x)?, &unlabeled.x),
        rec_loss(&reconstruct(&post, &unlabeled.x)?, &unlabeled.x)
    );
    println!("mixture unchanged: {}", post.mixture == pre.mixture);
    Ok(())
}
