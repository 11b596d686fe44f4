//! Scores an exported embedding file against a dataset's labels: linear
//! probe, k-means agreement, and cluster quality of the true classes.
//!
//! cargo run --release --example evaluate_embeddings -- EMBEDDINGS DATA_DIR [RUNS]

use mvmift::evalkit::{cluster_eval, linear_probe, quality_eval, ProbeConfig};
use mvmift::graphdata::load_dataset;
use mvmift::pipeline::read_embeddings;

fn main() -> mvmift::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: evaluate_embeddings EMBEDDINGS DATA_DIR [RUNS]");
        std::process::exit(1);
    }
    let runs = args.get(2).map_or(50, |s| s.parse().expect("runs"));
    let z = read_embeddings(&args[0])?;
    let ds = load_dataset(&args[1])?;
    println!("{}: {} nodes, {}-dimensional embeddings", ds.name, z.rows(), z.cols());

    let probe = linear_probe(&z, &ds.labels, ds.split.as_ref(), runs, 0, &ProbeConfig::default(), 1)?;
    let clusters = cluster_eval(&z, &ds.labels, 10, 0, 1)?;
    let quality = quality_eval(&z, &ds.labels)?;
    for report in [&probe, &clusters, &quality] {
        for (name, m) in &report.metrics {
            println!("  {name:<10} {:.4} ± {:.4} ({} runs)", m.mean, m.std, m.values.len());
        }
    }
    Ok(())
}
