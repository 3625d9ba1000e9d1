//! Walks through `z_s` and `z_u` of a trained model and prints the decoded
//! points. Varying `z_s` should move along a class's arc; varying `z_u`
//! should barely move the output.
//!
//! ```text
//! cargo run --release --example latent_traversal -- [seed] [epochs]
//! ```

use disvae::data::generate_toy_dataset;
use disvae::eval::{latent_traversal, linspace, synthesize_swap, TraversalMode};
use disvae::rng::SeededRng;
use disvae::training::{train, TrainConfig};

fn main() -> disvae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ds = generate_toy_dataset(1000, seed)?;
    let (params, _) = train(&TrainConfig { seed, epochs, ..TrainConfig::toy() }, &ds)?;

    let alphas = linspace(0.0, 1.0, 7);
    let mut rng = SeededRng::new(seed + 1);
    for mode in [TraversalMode::VaryZs, TraversalMode::VaryZu, TraversalMode::SingleZuDim(0)] {
        let alphas = match mode {
            TraversalMode::SingleZuDim(_) => linspace(-2.0, 2.0, 7),
            _ => alphas.clone(),
        };
        let t = latent_traversal(&params, 1, &alphas, mode, &mut rng)?;
        println!("{mode:?}, class 1:");
        for (i, a) in t.alphas.iter().enumerate() {
            let p = t.outputs.row_slice(i);
            println!("  alpha {a:+.2} -> ({:+.3}, {:+.3})", p[0], p[1]);
        }
    }

    // Label-relevant code of a class-0 point with the label-irrelevant code
    // of a class-2 point.
    let a = ds.x.select_rows(&[5]);
    let b = ds.x.select_rows(&[2005]);
    let s = synthesize_swap(&params, &a, &b)?;
    println!("swap: z_s from {:?}, z_u from {:?} -> {:?}", a.data(), b.data(), s.data());
    Ok(())
}
