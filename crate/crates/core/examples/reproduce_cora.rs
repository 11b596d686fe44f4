//! Trains the multi-view model on Cora and reports classification on the
//! fixed split plus k-means clustering agreement.
//!
//! cargo run --release --example reproduce_cora [-- DATA_DIR [EPOCHS [SEED [normalize]]]]

use std::time::Instant;

use mvmift::evalkit::{cluster_eval, linear_probe, ProbeConfig};
use mvmift::graphdata::load_dataset;
use mvmift::pipeline::{embed, train, TrainConfig};

fn main() -> mvmift::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args.first().map_or("data/cora", String::as_str);
    let epochs = args.get(1).map_or(500, |s| s.parse().expect("epochs"));
    let seed = args.get(2).map_or(0, |s| s.parse().expect("seed"));
    let normalize_features = args.get(3).is_some_and(|s| s == "normalize");

    let ds = load_dataset(dir)?;
    let config = TrainConfig {
        epochs,
        seed,
        normalize_features,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let model = train(&ds, &config)?;
    let last = model.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs in {:.1}s, final loss {:.4}",
        model.history.len(),
        start.elapsed().as_secs_f64(),
        last.total
    );

    let z = embed(&model, &ds)?;
    let probe = linear_probe(&z, &ds.labels, ds.split.as_ref(), 50, seed, &ProbeConfig::default(), 1)?;
    let acc = probe.metric("accuracy").expect("accuracy");
    println!("accuracy {:.2} ± {:.2}%", 100.0 * acc.mean, 100.0 * acc.std);

    let clusters = cluster_eval(&z, &ds.labels, 10, seed, 1)?;
    for name in ["nmi", "ari"] {
        let m = clusters.metric(name).expect("metric");
        println!("{name} {:.4} ± {:.4}", m.mean, m.std);
    }
    Ok(())
}
