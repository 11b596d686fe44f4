//! Converts the LINQS release of Cora (`cora.content`, `cora.cites`) into
//! the dataset directory layout, with a seeded split of 20 training nodes
//! per class and 1000 test nodes.
//!
//! cargo run --release --example convert_cora -- CONTENT CITES OUT_DIR [SEED]

use std::collections::{BTreeSet, HashMap};
use std::fs;

use mvmift::graphdata::{make_split_sized, GraphDataset};
use mvmift::{Error, Matrix, Result};

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: convert_cora CONTENT CITES OUT_DIR [SEED]");
        std::process::exit(1);
    }
    let seed: u64 = args.get(3).map_or(0, |s| s.parse().expect("seed"));

    let content = read(&args[0])?;
    let mut ids = HashMap::new();
    let mut rows = Vec::new();
    let mut names = Vec::new();
    for line in content.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        let (id, rest) = fields.split_first().expect("non-empty line");
        let (class, words) = rest.split_last().expect("class column");
        ids.insert(id.to_string(), rows.len());
        rows.push(words.iter().map(|w| w.parse::<f32>().expect("0/1 entry")).collect::<Vec<_>>());
        names.push(class.to_string());
    }
    let classes: Vec<&String> = names.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let labels: Vec<usize> = names
        .iter()
        .map(|c| classes.binary_search(&c).expect("known class"))
        .collect();

    let mut edges = Vec::new();
    let mut dropped = 0;
    for line in read(&args[1])?.lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let (a, b) = (it.next().expect("cited"), it.next().expect("citing"));
        match (ids.get(a), ids.get(b)) {
            (Some(&i), Some(&j)) if i != j => edges.push((i, j)),
            _ => dropped += 1,
        }
    }

    let split = make_split_sized(&labels, 20, Some(1000), seed)?;
    let features = Matrix::from_rows(&rows);
    let ds = GraphDataset::new("cora", features, edges, labels, Some(split))?;
    ds.save(&args[2])?;
    println!(
        "{} nodes, {} features, {} classes, {} undirected edges ({dropped} citation lines dropped)",
        ds.num_nodes(),
        ds.feature_dim(),
        ds.num_classes(),
        ds.undirected_edge_count()
    );
    for (i, c) in classes.iter().enumerate() {
        println!("  class {i}: {c}");
    }
    Ok(())
}
