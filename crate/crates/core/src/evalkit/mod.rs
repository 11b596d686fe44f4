//! Downstream evaluation of frozen embeddings: a linear probe, k-means
//! clustering scored against labels, internal cluster quality, and
//! aggregation of repeated runs into summary tables.

mod kmeans;
mod metrics;
mod probe;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, kmeans_plus_plus, kmeans_with, lloyd, KMeansConfig, KMeansResult};
pub use metrics::{ari, calinski_harabasz, compact_labels, nmi, silhouette};
pub use probe::{fit_logistic, lbfgs, probe_accuracy, LogisticModel, ProbeConfig};

use crate::error::{Error, Result};
use crate::graphdata::{make_split, Split};
use crate::numerics::{seeded_rng, Matrix};

/// Training nodes per class when a dataset ships without a split.
pub const DEFAULT_TRAIN_PER_CLASS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Classify,
    Cluster,
    EmbedQuality,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classify => "classify",
            Task::Cluster => "cluster",
            Task::EmbedQuality => "embed-quality",
        })
    }
}

/// Per-run values of one metric with their mean and sample standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRuns {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricRuns {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let (mean, std) = mean_std(&values)?;
        Ok(Self { values, mean, std })
    }
}

/// Maps `f` over `items` on up to `threads` scoped threads, keeping order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<R>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| scope.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean and sample (n−1) standard deviation; one value has std 0.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::contract("no values to summarize"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub dataset: String,
    pub model: String,
    pub metrics: BTreeMap<String, MetricRuns>,
    pub runs: usize,
    pub seeds: Vec<u64>,
    /// What differs between runs.
    pub variation: String,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricRuns> {
        self.metrics.get(name)
    }

    /// Checks that summaries match their per-run values.
    pub fn validate(&self) -> Result<()> {
        if self.runs != self.seeds.len() {
            return Err(Error::contract(format!(
                "{} runs but {} seeds",
                self.runs,
                self.seeds.len()
            )));
        }
        for (name, m) in &self.metrics {
            let (mean, std) = mean_std(&m.values)?;
            if m.values.len() != self.runs || (mean - m.mean).abs() > 1e-9 || (std - m.std).abs() > 1e-9 {
                return Err(Error::contract(format!("metric {name} is inconsistent")));
            }
        }
        Ok(())
    }
}

/// Linear-probe accuracy over `runs` runs. With a fixed split only the
/// probe initialization varies; otherwise every run also draws a fresh
/// stratified split with [`DEFAULT_TRAIN_PER_CLASS`] training nodes per class.
pub fn linear_probe(
    embeddings: &Matrix,
    labels: &[usize],
    split: Option<&Split>,
    runs: usize,
    seed: u64,
    config: &ProbeConfig,
    threads: usize,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::contract("runs must be positive"));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    let acc = par_map(&seeds, threads, |&s| match split {
        Some(sp) => probe_accuracy(embeddings, labels, &sp.train, &sp.test, config, s),
        None => {
            let sp = make_split(labels, DEFAULT_TRAIN_PER_CLASS, s)?;
            probe_accuracy(embeddings, labels, &sp.train, &sp.test, config, s)
        }
    })?;
    let mut metrics = BTreeMap::new();
    metrics.insert("accuracy".to_string(), MetricRuns::new(acc)?);
    Ok(EvalReport {
        task: Task::Classify,
        dataset: String::new(),
        model: String::new(),
        metrics,
        runs,
        seeds,
        variation: if split.is_some() {
            "probe initialization on a fixed split".into()
        } else {
            "split and probe initialization".into()
        },
        config: serde_json::json!({
            "c": config.c,
            "max_iter": config.max_iter,
            "tol": config.tol,
            "memory": config.memory,
            "train_per_class": if split.is_some() { None } else { Some(DEFAULT_TRAIN_PER_CLASS) },
        }),
    })
}

/// k-means with as many clusters as label classes, scored by NMI and ARI.
pub fn cluster_eval(
    embeddings: &Matrix,
    labels: &[usize],
    runs: usize,
    seed: u64,
    threads: usize,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::contract("runs must be positive"));
    }
    if embeddings.rows() != labels.len() {
        return Err(Error::Dimension {
            op: "cluster_eval",
            left: embeddings.shape(),
            right: (labels.len(), 1),
        });
    }
    let (_, k) = compact_labels(labels);
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    let scores = par_map(&seeds, threads, |&s| {
        let r = kmeans(embeddings, k, &mut seeded_rng(s))?;
        Ok((nmi(&r.assignment, labels)?, ari(&r.assignment, labels)?))
    })?;
    let (nmis, aris): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    let mut metrics = BTreeMap::new();
    metrics.insert("nmi".to_string(), MetricRuns::new(nmis)?);
    metrics.insert("ari".to_string(), MetricRuns::new(aris)?);
    let km = KMeansConfig::default();
    Ok(EvalReport {
        task: Task::Cluster,
        dataset: String::new(),
        model: String::new(),
        metrics,
        runs,
        seeds,
        variation: "k-means seed".into(),
        config: serde_json::json!({
            "k": k,
            "restarts": km.restarts,
            "max_iter": km.max_iter,
            "tol": km.tol,
        }),
    })
}

/// Calinski-Harabasz index and silhouette of the embeddings grouped by
/// their ground-truth labels.
pub fn quality_eval(embeddings: &Matrix, labels: &[usize]) -> Result<EvalReport> {
    let mut metrics = BTreeMap::new();
    metrics.insert("ch".to_string(), MetricRuns::new(vec![calinski_harabasz(embeddings, labels)?])?);
    metrics.insert("silhouette".to_string(), MetricRuns::new(vec![silhouette(embeddings, labels)?])?);
    Ok(EvalReport {
        task: Task::EmbedQuality,
        dataset: String::new(),
        model: String::new(),
        metrics,
        runs: 1,
        seeds: vec![0],
        variation: "none (deterministic)".into(),
        config: serde_json::json!({ "grouping": "labels" }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub task: Task,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dataset,model,metric,mean,std,runs\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.dataset, r.model, r.metric, r.mean, r.std, r.runs
            ));
        }
        s
    }
}

/// Pools reports of one task. Runs of the same dataset, model, and metric
/// are concatenated before summarizing; rows are sorted by those keys.
pub fn aggregate(reports: &[EvalReport]) -> Result<SummaryTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::contract("no reports to aggregate"))?;
    let mut pooled: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in reports {
        if r.task != first.task {
            return Err(Error::contract(format!(
                "cannot aggregate {} with {} reports",
                first.task, r.task
            )));
        }
        for (name, m) in &r.metrics {
            pooled
                .entry((r.dataset.clone(), r.model.clone(), name.clone()))
                .or_default()
                .extend(&m.values);
        }
    }
    let rows = pooled
        .into_iter()
        .map(|((dataset, model, metric), values)| {
            let (mean, std) = mean_std(&values)?;
            Ok(SummaryRow {
                dataset,
                model,
                metric,
                mean,
                std,
                runs: values.len(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SummaryTable { task: first.task, rows })
}
