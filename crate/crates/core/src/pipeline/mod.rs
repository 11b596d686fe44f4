//! Training loops for the multi-view model and the single-view baseline,
//! plus checkpoints and embedding export.

mod checkpoint;
mod export;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use export::{
    embed, read_embeddings, write_embeddings, write_embeddings_bin, write_embeddings_csv,
    EMBEDDING_MAGIC,
};

use crate::error::{Error, Result};
use crate::featgraph::{build_knn_graph, Metric};
use crate::graphdata::{adjacency_lists, corruption_permutation, normalize, row_normalize, GraphDataset};
use crate::model::{forward_dgi, forward_mvmift, BoundParams, GraphInputs, ModelKind, ModelParams};
use crate::numerics::{seeded_rng, Adam, Matrix, SparseMatrix, Tape, Var};
use crate::objectives::{
    common_mi_var, disagreement_var, js_mi_var, multi_view_var, reconstruction_var, sample_pairs,
    total_var, LossBreakdown,
};

/// Training hyperparameters. Unknown keys are rejected when parsed from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub lr: f32,
    pub epochs: usize,
    /// Neighbors per node in the feature graph.
    #[serde(alias = "K")]
    pub k: usize,
    pub lambda_c: f32,
    pub lambda_d: f32,
    pub metric: Metric,
    pub seed: u64,
    pub use_reconstruction: bool,
    pub use_disagreement: bool,
    /// Reconstruction pairs per node per view per epoch.
    pub pairs_per_node: usize,
    /// Row-normalize features before training and inference.
    pub normalize_features: bool,
    /// Stop after this many epochs without a lower total loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Mvmift,
            hidden: 512,
            lr: 0.001,
            epochs: 500,
            k: 3,
            lambda_c: 0.3,
            lambda_d: 0.01,
            metric: Metric::Cosine,
            seed: 0,
            use_reconstruction: true,
            use_disagreement: true,
            pairs_per_node: 1,
            normalize_features: false,
            patience: None,
        }
    }
}

impl TrainConfig {
    /// Field names accepted in a JSON config.
    pub const KEYS: [&'static str; 14] = [
        "model",
        "hidden",
        "lr",
        "epochs",
        "k",
        "lambda_c",
        "lambda_d",
        "metric",
        "seed",
        "use_reconstruction",
        "use_disagreement",
        "pairs_per_node",
        "normalize_features",
        "patience",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::contract(format!("lr must be positive, got {}", self.lr)));
        }
        if self.hidden == 0 {
            return Err(Error::contract("hidden must be positive"));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_d >= 0.0) {
            return Err(Error::contract("lambda_c and lambda_d must be non-negative"));
        }
        if self.pairs_per_node == 0 {
            return Err(Error::contract("pairs_per_node must be positive"));
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// One entry per completed epoch.
    pub history: Vec<LossBreakdown>,
    pub config: TrainConfig,
    /// Fingerprint of the dataset the model was trained on.
    pub fingerprint: String,
}

/// Prepared graph inputs for a dataset under a config.
pub fn prepare_inputs(dataset: &GraphDataset, config: &TrainConfig) -> Result<(GraphInputs, Vec<(usize, usize)>)> {
    let n = dataset.num_nodes();
    let features = if config.normalize_features {
        row_normalize(&dataset.features)
    } else {
        dataset.features.clone()
    };
    let adj_topology = Arc::new(normalize(&dataset.edges, n)?.into_matrix());
    let (adj_feature, feature_edges) = match config.model {
        ModelKind::Mvmift => {
            let g = build_knn_graph(&dataset.features, config.k, config.metric)?;
            (Arc::new(normalize(&g.edges, n)?.into_matrix()), g.edges)
        }
        ModelKind::Dgi => (Arc::new(SparseMatrix::empty(n, n)), Vec::new()),
    };
    Ok((
        GraphInputs {
            features: Arc::new(SparseMatrix::from_dense(&features)),
            adj_topology,
            adj_feature,
        },
        feature_edges,
    ))
}

fn check_dataset(dataset: &GraphDataset, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    let n = dataset.num_nodes();
    if n == 0 {
        return Err(Error::contract("dataset has no nodes"));
    }
    if config.model == ModelKind::Mvmift && config.k >= n {
        return Err(Error::contract(format!("K = {} must be smaller than n = {n}", config.k)));
    }
    Ok(())
}

/// Trains the model selected by `config.model`.
pub fn train(dataset: &GraphDataset, config: &TrainConfig) -> Result<TrainedModel> {
    match config.model {
        ModelKind::Mvmift => train_mvmift(dataset, config),
        ModelKind::Dgi => train_dgi(dataset, config),
    }
}

struct Tracker {
    best: f32,
    since: usize,
}

impl Tracker {
    fn new() -> Self {
        Self {
            best: f32::INFINITY,
            since: 0,
        }
    }

    /// True when training should stop.
    fn update(&mut self, total: f32, patience: Option<usize>) -> bool {
        if total < self.best {
            self.best = total;
            self.since = 0;
        } else {
            self.since += 1;
        }
        patience.is_some_and(|p| self.since >= p)
    }
}

fn apply_step(
    adam: &mut Adam,
    params: &mut ModelParams,
    tape: &Tape,
    bound: &BoundParams,
    loss: Var,
) -> Result<()> {
    let mut grads = tape.backward(loss)?;
    let owned: Vec<Matrix> = bound
        .vars
        .iter()
        .zip(params.tensors())
        .map(|(&v, (_, p))| grads.take(v).unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();
    let refs: Vec<&Matrix> = owned.iter().collect();
    adam.step(&mut params.tensors_mut(), &refs)
}

fn non_finite(epoch: usize, b: &LossBreakdown) -> Error {
    Error::NonFinite {
        epoch,
        detail: format!(
            "l_mmi={} l_cmi={} l_r={} l_d={} total={}",
            b.l_mmi, b.l_cmi, b.l_r, b.l_d, b.total
        ),
    }
}

/// Multi-view training: the feature graph is built once, then every epoch
/// runs a full-batch forward pass with one fresh corruption permutation and
/// one fresh set of reconstruction pairs, followed by one Adam step.
pub fn train_mvmift(dataset: &GraphDataset, config: &TrainConfig) -> Result<TrainedModel> {
    let mut config = config.clone();
    config.model = ModelKind::Mvmift;
    check_dataset(dataset, &config)?;
    let n = dataset.num_nodes();
    let (inputs, feature_edges) = prepare_inputs(dataset, &config)?;
    let adj_f = adjacency_lists(&feature_edges, n);
    let adj_t = adjacency_lists(&dataset.edges, n);

    let mut rng = seeded_rng(config.seed);
    let mut params = ModelParams::init(ModelKind::Mvmift, dataset.feature_dim(), config.hidden, &mut rng)?;
    let mut adam = Adam::new(config.lr, params.tensors().into_iter().map(|(_, m)| m));
    let mut history = Vec::with_capacity(config.epochs);
    let mut tracker = Tracker::new();

    for epoch in 0..config.epochs {
        let perm = Arc::new(corruption_permutation(n, &mut rng));
        let pairs = sample_pairs(&adj_f, &adj_t, config.pairs_per_node, &mut rng)?;

        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let fw = forward_mvmift(&mut tape, &inputs, &bound, Some(&perm))?;
        let (w_ft, w_tf, w_c) = (bound.vars[5], bound.vars[6], bound.vars[7]);

        let l_mmi = multi_view_var(&mut tape, &fw, w_ft, w_tf)?;
        let l_cmi = common_mi_var(&mut tape, &fw, w_c)?;
        let l_r = if config.use_reconstruction && !pairs.is_empty() {
            reconstruction_var(&mut tape, fw.z_c, &pairs)?
        } else {
            tape.constant(Matrix::scalar(0.0))
        };
        let l_d = if config.use_disagreement {
            disagreement_var(&mut tape, fw.z_f, fw.z_cf, fw.z_t, fw.z_ct)?
        } else {
            tape.constant(Matrix::scalar(0.0))
        };
        let total = total_var(&mut tape, l_mmi, l_cmi, l_r, l_d, config.lambda_c, config.lambda_d)?;

        let b = LossBreakdown {
            l_mmi: tape.value(l_mmi).item(),
            l_cmi: tape.value(l_cmi).item(),
            l_r: tape.value(l_r).item(),
            l_d: tape.value(l_d).item(),
            total: tape.value(total).item(),
        };
        if !b.is_finite() {
            return Err(non_finite(epoch, &b));
        }
        log::debug!("epoch {epoch}: {b:?}");
        apply_step(&mut adam, &mut params, &tape, &bound, total)?;
        history.push(b);
        if tracker.update(b.total, config.patience) {
            log::info!("stopping after epoch {epoch}: no improvement");
            break;
        }
    }

    Ok(TrainedModel {
        params,
        history,
        config,
        fingerprint: dataset.fingerprint(),
    })
}

/// Single-view baseline: topology encoder, corruption, summary, and one
/// Jensen-Shannon term.
pub fn train_dgi(dataset: &GraphDataset, config: &TrainConfig) -> Result<TrainedModel> {
    let mut config = config.clone();
    config.model = ModelKind::Dgi;
    check_dataset(dataset, &config)?;
    let n = dataset.num_nodes();
    let (inputs, _) = prepare_inputs(dataset, &config)?;

    let mut rng = seeded_rng(config.seed);
    let mut params = ModelParams::init(ModelKind::Dgi, dataset.feature_dim(), config.hidden, &mut rng)?;
    let mut adam = Adam::new(config.lr, params.tensors().into_iter().map(|(_, m)| m));
    let mut history = Vec::with_capacity(config.epochs);
    let mut tracker = Tracker::new();

    for epoch in 0..config.epochs {
        let perm = Arc::new(corruption_permutation(n, &mut rng));
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let fw = forward_dgi(&mut tape, &inputs, &bound, Some(&perm))?;
        let corrupted = fw.corrupted.expect("corruption requested");
        let mi = js_mi_var(&mut tape, fw.z, fw.s, corrupted, bound.vars[2])?;
        let total = tape.neg(mi);
        let b = LossBreakdown {
            l_mmi: tape.value(mi).item(),
            total: tape.value(total).item(),
            ..LossBreakdown::default()
        };
        if !b.is_finite() {
            return Err(non_finite(epoch, &b));
        }
        log::debug!("epoch {epoch}: {b:?}");
        apply_step(&mut adam, &mut params, &tape, &bound, total)?;
        history.push(b);
        if tracker.update(b.total, config.patience) {
            log::info!("stopping after epoch {epoch}: no improvement");
            break;
        }
    }

    Ok(TrainedModel {
        params,
        history,
        config,
        fingerprint: dataset.fingerprint(),
    })
}

/// Writes `epoch,l_mmi,l_cmi,l_r,l_d,total` rows.
pub fn losses_csv(history: &[LossBreakdown]) -> String {
    let mut s = String::from(LossBreakdown::CSV_HEADER);
    s.push('\n');
    for (e, b) in history.iter().enumerate() {
        s.push_str(&b.csv_row(e));
        s.push('\n');
    }
    s
}
