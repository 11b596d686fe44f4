//! Command-line front end. Every command writes its outputs into one
//! directory together with a `manifest.json`, except `embed`, whose output
//! is a file stem and whose manifest is `<stem>.manifest.json`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{
    aggregate, cluster_eval, linear_probe, quality_eval, EvalReport, ProbeConfig,
};
use crate::featgraph::{build_knn_graph, Metric};
use crate::graphdata::{load_dataset, write_file, EDGES_FILE};
use crate::model::ModelKind;
use crate::pipeline::{embed, load_checkpoint, losses_csv, save_checkpoint, train, write_embeddings, TrainConfig};
use crate::synthgen::{generate, SynthConfig, SynthKind};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "MVMIFT_THREADS";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSSES_FILE: &str = "losses.csv";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Parser, Debug)]
#[command(name = "mvmift", version, about = "Multi-view mutual information node embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Build the feature-view KNN graph of a dataset.
    KnnGraph(KnnArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Export embeddings from a trained model.
    Embed(EmbedArgs),
    /// Evaluate embeddings.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Summarize evaluation reports into one table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Feature,
    Topology,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Mvmift,
    Dgi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub nodes_per_class: Option<usize>,
    #[arg(long)]
    pub center_distance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct KnnArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "cosine")]
    pub metric: MetricArg,
    /// Output directory for edges.tsv; the dataset directory is never modified.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with training settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda_c: Option<f32>,
    #[arg(long)]
    pub lambda_d: Option<f32>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub pairs_per_node: Option<usize>,
    #[arg(long)]
    pub no_reconstruction: bool,
    #[arg(long)]
    pub no_disagreement: bool,
    #[arg(long)]
    pub normalize_features: bool,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Training output directory holding the checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output stem; `.csv` and `.bin` files are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Report directory; without it the report goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model label recorded in the report; defaults to the embedding file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Linear-probe node classification.
    Classify {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// k-means clustering scored by NMI and ARI.
    Cluster {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Calinski-Harabasz index and silhouette grouped by labels.
    Quality {
        #[command(flatten)]
        common: EvalArgs,
    },
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files of a single task.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub dataset_fingerprint: Option<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value, fingerprint: Option<String>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            dataset_fingerprint: fingerprint,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            outputs: Vec::new(),
        }
    }

    /// Writes via a temporary file and a rename.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        write_file(&tmp, serde_json::to_string_pretty(self)?.as_bytes())?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Worker threads from [`THREADS_ENV`], defaulting to 1.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Reads a JSON config over the defaults. Unknown keys are rejected with the
/// list of accepted ones.
pub fn load_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(TrainConfig::default());
    }
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !TrainConfig::KEYS.contains(&key.as_str()) && key != "K" {
                return Err(Error::contract(format!(
                    "unknown config key {key:?}; valid keys: {}",
                    TrainConfig::KEYS.join(", ")
                )));
            }
        }
    }
    let config: TrainConfig = serde_json::from_value(value)?;
    config.validate()?;
    Ok(config)
}

/// Applies command-line overrides on top of a config.
pub fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut c = match &args.config {
        Some(p) => load_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = args.model {
        c.model = match m {
            ModelArg::Mvmift => ModelKind::Mvmift,
            ModelArg::Dgi => ModelKind::Dgi,
        };
    }
    if let Some(v) = args.k {
        c.k = v;
    }
    if let Some(v) = args.lambda_c {
        c.lambda_c = v;
    }
    if let Some(v) = args.lambda_d {
        c.lambda_d = v;
    }
    if let Some(v) = args.epochs {
        c.epochs = v;
    }
    if let Some(v) = args.hidden {
        c.hidden = v;
    }
    if let Some(v) = args.lr {
        c.lr = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.metric {
        c.metric = v.into();
    }
    if let Some(v) = args.patience {
        c.patience = Some(v);
    }
    if let Some(v) = args.pairs_per_node {
        c.pairs_per_node = v;
    }
    if args.no_reconstruction {
        c.use_reconstruction = false;
    }
    if args.no_disagreement {
        c.use_disagreement = false;
    }
    if args.normalize_features {
        c.normalize_features = true;
    }
    c.validate()?;
    Ok(c)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let kind = match a.kind {
        KindArg::Feature => SynthKind::Feature,
        KindArg::Topology => SynthKind::Topology,
    };
    let mut cfg = SynthConfig::new(kind, a.seed);
    if let Some(v) = a.nodes_per_class {
        cfg.nodes_per_class = v;
    }
    if let Some(v) = a.center_distance {
        cfg.center_distance = v;
    }
    let ds = generate(&cfg)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("synth", serde_json::to_value(&cfg)?, Some(ds.fingerprint()), Some(a.seed));
    m.outputs = vec![display(&a.out)];
    m.write_atomic(&a.out.join(MANIFEST_FILE))?;
    ds.save(&a.out)?;
    log::info!("wrote {} nodes, {} edges to {}", ds.num_nodes(), ds.undirected_edge_count(), a.out.display());
    Ok(())
}

fn run_knn(a: &KnnArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let g = build_knn_graph(&ds.features, a.k, a.metric.into())?;
    create_dir(&a.out)?;
    let edges_path = a.out.join(EDGES_FILE);
    let mut m = RunManifest::new(
        "knn-graph",
        serde_json::json!({ "k": a.k, "metric": Metric::from(a.metric), "dataset": display(&a.dataset) }),
        Some(ds.fingerprint()),
        None,
    );
    m.outputs = vec![display(&edges_path)];
    m.write_atomic(&a.out.join(MANIFEST_FILE))?;
    let mut s = String::new();
    for (i, j) in &g.edges {
        s.push_str(&format!("{i}\t{j}\n"));
    }
    write_file(&edges_path, s.as_bytes())?;
    log::info!("feature graph: {} edges", g.edges.len());
    Ok(())
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let config = resolve_train_config(a)?;
    let ds = load_dataset(&a.dataset)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("train", serde_json::to_value(&config)?, Some(ds.fingerprint()), Some(config.seed));
    m.outputs = [CHECKPOINT_FILE, LOSSES_FILE, CONFIG_FILE]
        .iter()
        .map(|f| display(&a.out.join(f)))
        .collect();
    m.write_atomic(&a.out.join(MANIFEST_FILE))?;
    let model = train(&ds, &config)?;
    save_checkpoint(&model, a.out.join(CHECKPOINT_FILE))?;
    write_file(&a.out.join(LOSSES_FILE), losses_csv(&model.history).as_bytes())?;
    write_file(&a.out.join(CONFIG_FILE), serde_json::to_string_pretty(&config)?.as_bytes())?;
    if let Some(last) = model.history.last() {
        log::info!("final loss {}", last.total);
    }
    Ok(())
}

fn run_embed(a: &EmbedArgs) -> Result<()> {
    let model = load_checkpoint(a.model.join(CHECKPOINT_FILE))?;
    let ds = load_dataset(&a.dataset)?;
    let z = embed(&model, &ds)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut m = RunManifest::new(
        "embed",
        serde_json::json!({ "model": display(&a.model), "dataset": display(&a.dataset) }),
        Some(ds.fingerprint()),
        Some(model.config.seed),
    );
    m.outputs = vec![display(&a.out.with_extension("csv")), display(&a.out.with_extension("bin"))];
    m.write_atomic(&a.out.with_extension("manifest.json"))?;
    write_embeddings(&z, &a.out)?;
    Ok(())
}

fn emit_report(mut report: EvalReport, common: &EvalArgs, fingerprint: String, command: &str) -> Result<()> {
    report.dataset = common
        .dataset
        .file_name()
        .map_or_else(|| display(&common.dataset), |s| s.to_string_lossy().into_owned());
    report.model = common.name.clone().unwrap_or_else(|| {
        common
            .embeddings
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });
    let json = serde_json::to_string_pretty(&report)?;
    match &common.out {
        None => println!("{json}"),
        Some(dir) => {
            create_dir(dir)?;
            let mut m = RunManifest::new(command, report.config.clone(), Some(fingerprint), Some(common.seed));
            m.outputs = vec![display(&dir.join("report.json")), display(&dir.join("report.csv"))];
            m.write_atomic(&dir.join(MANIFEST_FILE))?;
            write_file(&dir.join("report.json"), json.as_bytes())?;
            let table = aggregate(std::slice::from_ref(&report))?;
            write_file(&dir.join("report.csv"), table.to_csv().as_bytes())?;
        }
    }
    for (name, r) in &report.metrics {
        eprintln!("{name}: {:.4} ± {:.4} over {} run(s)", r.mean, r.std, r.values.len());
    }
    Ok(())
}

fn run_eval(cmd: &EvalCommand) -> Result<()> {
    let common = match cmd {
        EvalCommand::Classify { common, .. }
        | EvalCommand::Cluster { common, .. }
        | EvalCommand::Quality { common } => common,
    };
    let ds = load_dataset(&common.dataset)?;
    let z = crate::pipeline::read_embeddings(&common.embeddings)?;
    if z.rows() != ds.num_nodes() {
        return Err(Error::contract(format!(
            "embeddings have {} rows but the dataset has {} nodes",
            z.rows(),
            ds.num_nodes()
        )));
    }
    let threads = default_threads();
    let (report, name) = match cmd {
        EvalCommand::Classify { runs, c, max_iter, .. } => {
            let cfg = ProbeConfig {
                c: *c,
                max_iter: *max_iter,
                ..ProbeConfig::default()
            };
            (
                linear_probe(&z, &ds.labels, ds.split.as_ref(), *runs, common.seed, &cfg, threads)?,
                "eval classify",
            )
        }
        EvalCommand::Cluster { runs, .. } => {
            (cluster_eval(&z, &ds.labels, *runs, common.seed, threads)?, "eval cluster")
        }
        EvalCommand::Quality { .. } => (quality_eval(&z, &ds.labels)?, "eval quality"),
    };
    emit_report(report, common, ds.fingerprint(), name)
}

fn run_report(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::new();
    for p in &a.reports {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let r: EvalReport = serde_json::from_str(&text)?;
        r.validate()?;
        reports.push(r);
    }
    let table = aggregate(&reports)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new(
        "report",
        serde_json::json!({ "reports": a.reports.iter().map(|p| display(p)).collect::<Vec<_>>() }),
        None,
        None,
    );
    m.outputs = vec![display(&a.out.join("summary.json")), display(&a.out.join("summary.csv"))];
    m.write_atomic(&a.out.join(MANIFEST_FILE))?;
    write_file(&a.out.join("summary.json"), serde_json::to_string_pretty(&table)?.as_bytes())?;
    write_file(&a.out.join("summary.csv"), table.to_csv().as_bytes())?;
    print!("{}", table.to_csv());
    Ok(())
}

/// Runs one command. Returns the process exit code: 0 on success, 1 for
/// usage and contract errors, 2 for I/O errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 1,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => run_synth(a),
        Command::KnnGraph(a) => run_knn(a),
        Command::Train(a) => run_train(a),
        Command::Embed(a) => run_embed(a),
        Command::Eval(c) => run_eval(c),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_unknown_flags() {
        assert_eq!(dispatch(["mvmift", "--help"]), 0);
        assert_eq!(dispatch(["mvmift", "train", "--bogus"]), 1);
        assert_eq!(dispatch(["mvmift"]), 1);
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.json");
        fs::write(&empty, "").unwrap();
        assert_eq!(load_config(&empty).unwrap(), TrainConfig::default());
        fs::write(&empty, "{}").unwrap();
        assert_eq!(load_config(&empty).unwrap(), TrainConfig::default());

        let k4 = dir.path().join("k4.json");
        fs::write(&k4, r#"{"k": 4}"#).unwrap();
        assert_eq!(load_config(&k4).unwrap().k, 4);

        let args = Cli::try_parse_from([
            "mvmift", "train", "--dataset", "d", "--out", "o", "--config", k4.to_str().unwrap(), "--k", "5",
        ])
        .unwrap();
        let Command::Train(t) = args.command else { panic!() };
        assert_eq!(resolve_train_config(&t).unwrap().k, 5);

        let bad = dir.path().join("bad.json");
        fs::write(&bad, r#"{"learning_rate": 0.1}"#).unwrap();
        let msg = load_config(&bad).unwrap_err().to_string();
        assert!(msg.contains("learning_rate") && msg.contains("lambda_c"), "{msg}");
    }

    #[test]
    fn missing_dataset_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let code = dispatch([
            "mvmift".to_string(),
            "knn-graph".into(),
            "--dataset".into(),
            dir.path().join("nope").display().to_string(),
            "--out".into(),
            dir.path().join("out").display().to_string(),
        ]);
        assert_eq!(code, 2);
    }
}
