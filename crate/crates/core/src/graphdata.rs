//! Graph datasets: in-memory model, the on-disk directory format,
//! symmetric normalization, train/test splits, and feature corruption.
//!
//! On-disk layout of a dataset directory:
//!
//! ```text
//! edges.tsv     one undirected edge per line: "i<TAB>j", 0-based, i < j
//! features.csv  n lines of d comma-separated floats
//! labels.txt    n lines, one integer class id each
//! split.json    optional: {"train":[ids],"test":[ids]}
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Matrix, Rng, SparseMatrix};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";
pub const SPLIT_FILE: &str = "split.json";

/// Train/test node partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(skip)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub features: Matrix,
    /// Undirected edges, each stored once with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<usize>,
    pub split: Option<Split>,
}

impl GraphDataset {
    /// Validates and canonicalizes the edge list (orders each pair, sorts,
    /// removes duplicates). Self-loops are rejected.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: Vec<usize>,
        split: Option<Split>,
    ) -> Result<Self> {
        let n = features.rows();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::contract(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::contract(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        if labels.len() != n {
            return Err(Error::contract(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some(s) = &split {
            validate_split(s, n)?;
        }
        Ok(Self {
            name: name.into(),
            features,
            edges: set.into_iter().collect(),
            labels,
            split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Count with both directions of every edge, the convention some
    /// published tables use.
    pub fn directed_edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// SHA-256 over shape, feature bits, edges, and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_nodes() as u64).to_le_bytes());
        h.update((self.feature_dim() as u64).to_le_bytes());
        for v in self.features.data() {
            h.update(v.to_bits().to_le_bytes());
        }
        for &(a, b) in &self.edges {
            h.update((a as u64).to_le_bytes());
            h.update((b as u64).to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        hex(&h.finalize())
    }

    /// Writes the dataset directory (creating it if needed).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut edges = String::with_capacity(self.edges.len() * 12);
        for &(a, b) in &self.edges {
            edges.push_str(&format!("{a}\t{b}\n"));
        }
        write_file(&dir.join(EDGES_FILE), edges.as_bytes())?;

        let mut feats = String::with_capacity(self.features.data().len() * 4);
        for r in 0..self.num_nodes() {
            let row = self.features.row(r);
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    feats.push(',');
                }
                feats.push_str(&v.to_string());
            }
            feats.push('\n');
        }
        write_file(&dir.join(FEATURES_FILE), feats.as_bytes())?;

        let labels: String = self.labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(&dir.join(LABELS_FILE), labels.as_bytes())?;

        if let Some(split) = &self.split {
            write_file(&dir.join(SPLIT_FILE), &serde_json::to_vec(split)?)?;
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn validate_split(s: &Split, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in s.train.iter().chain(&s.test) {
        if i >= n {
            return Err(Error::contract(format!("split references node {i} of {n}")));
        }
        if seen[i] {
            return Err(Error::contract(format!(
                "node {i} appears twice in the split"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Loads a dataset directory. The directory name becomes the dataset name.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let fpath = dir.join(FEATURES_FILE);
    let text = read_file(&fpath)?;
    let mut data = Vec::new();
    let mut d: Option<usize> = None;
    let mut n = 0usize;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f32 = tok
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fpath, ln + 1, format!("bad float {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(&fpath, ln + 1, "non-finite feature"));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(Error::parse(
                    &fpath,
                    ln + 1,
                    format!("ragged row: {width} values, expected {w}"),
                ))
            }
            _ => {}
        }
        n += 1;
    }
    let features = Matrix::from_vec(n, d.unwrap_or(0), data)?;

    let lpath = dir.join(LABELS_FILE);
    let mut labels = Vec::with_capacity(n);
    for (ln, line) in read_file(&lpath)?.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| Error::parse(&lpath, ln + 1, format!("bad label {t:?}")))?;
        if v < 0 || v as usize >= n.max(1) {
            return Err(Error::parse(&lpath, ln + 1, format!("label {v} out of range")));
        }
        labels.push(v as usize);
    }
    if labels.len() != n {
        return Err(Error::parse(
            &lpath,
            labels.len(),
            format!("{} labels for {n} feature rows", labels.len()),
        ));
    }

    let epath = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    for (ln, line) in read_file(&epath)?.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| Error::parse(&epath, ln + 1, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| Error::parse(&epath, ln + 1, format!("bad node id {tok:?}")))
        };
        let (a, b) = (next()?, next()?);
        if a == b {
            return Err(Error::parse(&epath, ln + 1, format!("self-loop on node {a}")));
        }
        if a >= n || b >= n {
            return Err(Error::parse(
                &epath,
                ln + 1,
                format!("edge ({a}, {b}) out of range for {n} nodes"),
            ));
        }
        edges.push((a, b));
    }

    let spath = dir.join(SPLIT_FILE);
    let split = if spath.exists() {
        let s: Split = serde_json::from_str(&read_file(&spath)?)?;
        Some(s)
    } else {
        None
    };
    GraphDataset::new(name, features, edges, labels, split)
}

/// `D̂^{-1/2}(A+I)D̂^{-1/2}` for an undirected graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(SparseMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.0
    }
}

/// Symmetric GCN normalization with self-loops; isolated nodes get `[1]`.
pub fn normalize(edges: &[(usize, usize)], n: usize) -> Result<NormalizedAdjacency> {
    let mut degree = vec![1.0f64; n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::contract(format!(
                "edge ({a}, {b}) out of range for {n} nodes"
            )));
        }
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    let inv: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut trip = Vec::with_capacity(n + 2 * edges.len());
    for (i, &s) in inv.iter().enumerate() {
        trip.push((i, i, (s * s) as f32));
    }
    for &(a, b) in edges {
        let w = (inv[a] * inv[b]) as f32;
        trip.push((a, b, w));
        trip.push((b, a, w));
    }
    Ok(NormalizedAdjacency(SparseMatrix::from_triplets(n, n, trip)?))
}

/// Sorted neighbor lists of an undirected edge list.
pub fn adjacency_lists(edges: &[(usize, usize)], n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    adj
}

/// Uniformly random permutation of `0..n`.
pub fn corruption_permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Row-shuffled copy of the features. The adjacency is left untouched by
/// design of the negative sampler.
pub fn corrupt(features: &Matrix, rng: &mut Rng) -> Matrix {
    let perm = corruption_permutation(features.rows(), rng);
    features
        .permute_rows(&perm)
        .expect("permutation length equals row count")
}

/// Scales each row to sum 1; rows summing to zero are left unchanged.
pub fn row_normalize(features: &Matrix) -> Matrix {
    let mut out = features.clone();
    for r in 0..out.rows() {
        let s: f64 = out.row(r).iter().map(|&v| v as f64).sum();
        if s != 0.0 {
            out.row_mut(r).iter_mut().for_each(|v| *v = (*v as f64 / s) as f32);
        }
    }
    out
}

/// `per_class` random training nodes per class; all other nodes test.
pub fn make_split(labels: &[usize], per_class: usize, seed: u64) -> Result<Split> {
    make_split_sized(labels, per_class, None, seed)
}

/// Like [`make_split`], but optionally caps the test set at `test_count`
/// nodes drawn uniformly from the remainder (public-split style).
pub fn make_split_sized(
    labels: &[usize],
    per_class: usize,
    test_count: Option<usize>,
    seed: u64,
) -> Result<Split> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = seeded_rng(seed);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < per_class {
            return Err(Error::contract(format!(
                "class {c} has {} nodes, fewer than {per_class} requested for training",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_class]);
        rest.extend_from_slice(&members[per_class..]);
    }
    if rest.is_empty() {
        return Err(Error::contract("split leaves no test nodes"));
    }
    if let Some(k) = test_count {
        if k > rest.len() {
            return Err(Error::contract(format!(
                "{k} test nodes requested, only {} available",
                rest.len()
            )));
        }
        rest.sort_unstable();
        rest.shuffle(&mut rng);
        rest.truncate(k);
    }
    train.sort_unstable();
    rest.sort_unstable();
    Ok(Split {
        train,
        test: rest,
        seed: Some(seed),
    })
}
