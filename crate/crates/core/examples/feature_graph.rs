//! Builds KNN feature graphs for a range of K and compares how often their
//! edges join same-class nodes with the input topology.
//!
//! cargo run --release --example feature_graph [-- DATA_DIR]

use mvmift::featgraph::{build_knn_graph, Metric};
use mvmift::graphdata::{load_dataset, GraphDataset};
use mvmift::synthgen::{generate, SynthConfig, SynthKind};

fn homophily(ds: &GraphDataset, edges: &[(usize, usize)]) -> f64 {
    let same = edges.iter().filter(|&&(a, b)| ds.labels[a] == ds.labels[b]).count();
    same as f64 / edges.len().max(1) as f64
}

fn main() -> mvmift::Result<()> {
    let datasets = match std::env::args().nth(1) {
        Some(dir) => vec![load_dataset(dir)?],
        None => vec![
            generate(&SynthConfig::new(SynthKind::Feature, 0))?,
            generate(&SynthConfig::new(SynthKind::Topology, 0))?,
        ],
    };
    for ds in &datasets {
        println!(
            "{}: topology has {} edges, {:.1}% within a class",
            ds.name,
            ds.edges.len(),
            100.0 * homophily(ds, &ds.edges)
        );
        for metric in [Metric::Cosine, Metric::Euclidean] {
            for k in [1, 3, 5, 10] {
                let g = build_knn_graph(&ds.features, k, metric)?;
                println!(
                    "  {metric:<9} K={k:<2} {:>6} edges, {:.1}% within a class",
                    g.edges.len(),
                    100.0 * homophily(ds, &g.edges)
                );
            }
        }
    }
    Ok(())
}
