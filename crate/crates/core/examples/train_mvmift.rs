//! Trains the multi-view model on the feature-kind synthetic graph and
//! scores its embeddings with the linear probe.
//!
//! cargo run --release --example train_mvmift [-- EPOCHS [feature|topology]]

use std::time::Instant;

use mvmift::evalkit::{linear_probe, ProbeConfig};
use mvmift::pipeline::{embed, train_mvmift, TrainConfig};
use mvmift::synthgen::{generate, SynthConfig, SynthKind};

fn main() -> mvmift::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(500, |s| s.parse().expect("epochs"));
    let kind: SynthKind = args.next().map_or(Ok(SynthKind::Feature), |s| s.parse())?;

    let ds = generate(&SynthConfig::new(kind, 0))?;
    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let model = train_mvmift(&ds, &config)?;
    let secs = start.elapsed().as_secs_f64();
    for (e, b) in model.history.iter().enumerate() {
        if e % 50 == 0 || e + 1 == model.history.len() {
            println!(
                "epoch {e:>3}: total {:.4}  l_mmi {:.4}  l_cmi {:.4}  l_r {:.4}  l_d {:.4}",
                b.total, b.l_mmi, b.l_cmi, b.l_r, b.l_d
            );
        }
    }
    println!("trained {} epochs in {secs:.1}s", model.history.len());

    let z = embed(&model, &ds)?;
    let report = linear_probe(&z, &ds.labels, None, 50, 0, &ProbeConfig::default(), 1)?;
    let acc = report.metric("accuracy").expect("accuracy");
    println!("{}: probe accuracy {:.2} ± {:.2}%", ds.name, 100.0 * acc.mean, 100.0 * acc.std);
    Ok(())
}
