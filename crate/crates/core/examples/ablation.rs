//! Turns the reconstruction and disagreement terms off one at a time and
//! compares probe accuracy across training seeds.
//!
//! cargo run --release --example ablation [-- SEEDS [EPOCHS]]

use mvmift::evalkit::{linear_probe, mean_std, ProbeConfig};
use mvmift::pipeline::{embed, train_mvmift, TrainConfig};
use mvmift::synthgen::{generate, SynthConfig, SynthKind};

fn main() -> mvmift::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(5, |s| s.parse().expect("seeds"));
    let epochs: usize = args.next().map_or(500, |s| s.parse().expect("epochs"));
    let ds = generate(&SynthConfig::new(SynthKind::Feature, 0))?;

    let variants = [("full", true, true), ("no reconstruction", false, true), ("no disagreement", true, false)];
    for (name, rec, dis) in variants {
        let mut accs = Vec::new();
        for seed in 0..seeds {
            let config = TrainConfig {
                epochs,
                seed,
                use_reconstruction: rec,
                use_disagreement: dis,
                ..TrainConfig::default()
            };
            let z = embed(&train_mvmift(&ds, &config)?, &ds)?;
            let r = linear_probe(&z, &ds.labels, None, 50, seed, &ProbeConfig::default(), 1)?;
            accs.push(100.0 * r.metric("accuracy").expect("accuracy").mean);
        }
        let (mean, std) = mean_std(&accs)?;
        println!("{name:<18} {mean:.2} ± {std:.2}%  per seed {accs:.2?}");
    }
    Ok(())
}
