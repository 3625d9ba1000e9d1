//! Fills masked coordinates from the reconstruction of the corrupted input.
//!
//! ```text
//! cargo run --release --example inpainting -- [seed] [epochs]
//! ```

use disvae::data::generate_toy_dataset;
use disvae::eval::inpaint;
use disvae::training::{train, TrainConfig};
use disvae::Tensor;

fn main() -> disvae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ds = generate_toy_dataset(1000, seed)?;
    let (params, _) = train(&TrainConfig { seed, epochs, ..TrainConfig::toy() }, &ds)?;

    let rows: Vec<usize> = (0..3).map(|c| c * 1000 + 17).collect();
    let x = ds.x.select_rows(&rows);
    // Hide the y coordinate of every point.
    let mask = Tensor::from_vec(3, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    let out = inpaint(&params, &x, &mask)?;
    for r in 0..3 {
        println!(
            "class {}: x = {:?} -> inpainted {:?}",
            ds.labels[rows[r]],
            x.row_slice(r).iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            out.row_slice(r).iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
