//! Trains the single-view baseline and the multi-view model side by side on
//! both synthetic graphs.
//!
//! cargo run --release --example dgi_baseline [-- EPOCHS]

use std::time::Instant;

use mvmift::evalkit::{linear_probe, ProbeConfig};
use mvmift::model::ModelKind;
use mvmift::pipeline::{embed, train, TrainConfig};
use mvmift::synthgen::{generate, SynthConfig, SynthKind};

fn main() -> mvmift::Result<()> {
    let epochs = std::env::args().nth(1).map_or(500, |s| s.parse().expect("epochs"));
    println!("{:<20} {:<8} {:>16} {:>8}", "dataset", "model", "accuracy", "time");
    for kind in [SynthKind::Feature, SynthKind::Topology] {
        let ds = generate(&SynthConfig::new(kind, 0))?;
        for model in [ModelKind::Dgi, ModelKind::Mvmift] {
            let config = TrainConfig {
                model,
                epochs,
                ..TrainConfig::default()
            };
            let start = Instant::now();
            let trained = train(&ds, &config)?;
            let secs = start.elapsed().as_secs_f64();
            let z = embed(&trained, &ds)?;
            let r = linear_probe(&z, &ds.labels, None, 50, 0, &ProbeConfig::default(), 1)?;
            let acc = r.metric("accuracy").expect("accuracy");
            println!(
                "{:<20} {:<8} {:>7.2} ± {:>4.2}% {:>7.0}s",
                ds.name,
                model.to_string(),
                100.0 * acc.mean,
                100.0 * acc.std,
                secs
            );
        }
    }
    Ok(())
}
