//! Trains the disentangled model and the cVAE-GAN baseline on the three
//! half circles, then scores both.
//!
//! ```text
//! cargo run --release --example toy_experiment -- [seed] [epochs] [out_dir]
//! ```
//!
//! With an output directory, scatter plots of real and generated points are
//! written there as SVG.

use std::path::PathBuf;
use std::time::Instant;

use disvae::cli::plot::scatter_svg;
use disvae::cli::write_atomic;
use disvae::data::generate_toy_dataset;
use disvae::eval::{
    classifier_score, generate_per_class, intra_class_diversity, internal_nn_distance, mean_nn_distance,
    subsample, Generator, OracleClassifier, OracleOptions, RbfKernel,
};
use disvae::rng::SeededRng;
use disvae::training::{train, train_baseline_cvaegan, TrainConfig};

fn main() -> disvae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let out = args.get(2).map(PathBuf::from);

    let real = generate_toy_dataset(1000, seed)?;
    let held_out = generate_toy_dataset(500, seed + 10_000)?;
    let oracle = OracleClassifier::train(&real, &held_out, &OracleOptions::default())?;
    println!("oracle held-out accuracy {:.4}", oracle.held_out_accuracy);

    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::toy()
    };
    let t = Instant::now();
    let (ours, hist) = train(&config, &real)?;
    println!("ours: {} epochs in {:.1}s", hist.epochs.len(), t.elapsed().as_secs_f64());
    let last = hist.epochs.last().expect("at least one epoch");
    println!(
        "  final l_rec {:.4} l_kl {:.4} l_gm {:.4} l_c {:.4} l_d {:.4}",
        last.losses.l_rec, last.losses.l_kl, last.losses.l_gm, last.losses.l_c_adv, last.losses.l_d_adv
    );
    let t = Instant::now();
    let (base, _) = train_baseline_cvaegan(&config, &real)?;
    println!("baseline: {:.1}s", t.elapsed().as_secs_f64());

    let mut rng = SeededRng::derived(seed, 99);
    let mut panels = vec![("real".to_string(), real.clone())];
    for (name, model) in [("ours", &ours as &dyn Generator), ("cvae-gan", &base as &dyn Generator)] {
        let gen = generate_per_class(model, 1000, &mut rng)?;
        let score = classifier_score(&gen.x, &oracle)?;
        println!("{name}: classifier score {score:.4}");
        for c in 0..3i64 {
            let real_c = real.x.select_rows(&real.indices_of(c));
            let gen_c = gen.x.select_rows(&gen.indices_of(c));
            let k = RbfKernel::median_bandwidth(&real_c)?;
            let div = intra_class_diversity(&subsample(&gen_c, 1000, &mut rng), |a, b| k.eval(a, b))?;
            let nn = mean_nn_distance(&gen_c, &real_c)?;
            let internal = internal_nn_distance(&real_c)?;
            println!("  class {c}: diversity {div:.4}  nn {nn:.4} (real internal {internal:.4})");
        }
        panels.push((name.to_string(), gen));
    }
    if let Some(dir) = out {
        let refs: Vec<_> = panels.iter().map(|(n, d)| (n.as_str(), d)).collect();
        let path = dir.join(format!("toy_seed{seed}.svg"));
        write_atomic(&path, scatter_svg(&refs).as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
