//! Loss terms. Each term has a tape-level builder (`*_var`) used for
//! training and a plain-matrix wrapper that replays the same operations on
//! constants, so both paths round identically.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardBundle, InnerProductDecoder};
use crate::numerics::{Matrix, Rng, Tape, Var};

/// Floor applied to probabilities before taking logs in the reconstruction term.
pub const PROB_FLOOR: f32 = 1e-7;

/// Rejection-sampling attempts before falling back to enumerating non-neighbors.
const REJECTION_TRIES: usize = 64;

/// Scalar loss components of one epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_mmi: f32,
    pub l_cmi: f32,
    pub l_r: f32,
    pub l_d: f32,
    pub total: f32,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.l_mmi, self.l_cmi, self.l_r, self.l_d, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    pub const CSV_HEADER: &'static str = "epoch,l_mmi,l_cmi,l_r,l_d,total";

    pub fn csv_row(&self, epoch: usize) -> String {
        format!(
            "{epoch},{},{},{},{},{}",
            self.l_mmi, self.l_cmi, self.l_r, self.l_d, self.total
        )
    }
}

/// Positive and negative partners drawn for one view.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViewPairs {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl ViewPairs {
    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSample {
    pub feature: ViewPairs,
    pub topology: ViewPairs,
}

impl PairSample {
    pub fn is_empty(&self) -> bool {
        self.feature.is_empty() && self.topology.is_empty()
    }
}

/// `(1/n) Σ [log σ(z_i·W·s) + log σ(−z̃_i·W·s)]` with logits clamped to ±30.
pub fn js_mi_var(tape: &mut Tape, patch: Var, summary: Var, corrupted: Var, w: Var) -> Result<Var> {
    // W·sᵀ as an h×1 column, shared by both halves.
    let st = tape.transpose(summary);
    let ws = tape.matmul(w, st)?;
    let pos = tape.matmul(patch, ws)?;
    let neg = tape.matmul(corrupted, ws)?;
    let lp = tape.log_sigmoid(pos);
    let nneg = tape.neg(neg);
    let ln = tape.log_sigmoid(nneg);
    let both = tape.add(lp, ln)?;
    Ok(tape.mean(both))
}

pub fn js_mi_objective(patch: &Matrix, summary: &Matrix, corrupted: &Matrix, w: &Matrix) -> Result<f32> {
    if patch.shape() != corrupted.shape() {
        return Err(Error::Dimension {
            op: "js_mi_objective",
            left: patch.shape(),
            right: corrupted.shape(),
        });
    }
    let mut tape = Tape::new();
    let (p, s, c, w) = (
        tape.constant(patch.clone()),
        tape.constant(summary.clone()),
        tape.constant(corrupted.clone()),
        tape.constant(w.clone()),
    );
    let v = js_mi_var(&mut tape, p, s, c, w)?;
    Ok(tape.value(v).item())
}

/// Cross-view term: feature patches against the topology summary plus
/// topology patches against the feature summary.
pub fn multi_view_var(tape: &mut Tape, bundle: &ForwardBundle, w_ft: Var, w_tf: Var) -> Result<Var> {
    let corrupted = bundle
        .corrupted
        .as_ref()
        .ok_or_else(|| Error::contract("multi-view loss needs corrupted patches"))?;
    let a = js_mi_var(tape, bundle.z_f, bundle.s_t, corrupted.z_f, w_ft)?;
    let b = js_mi_var(tape, bundle.z_t, bundle.s_f, corrupted.z_t, w_tf)?;
    tape.add(a, b)
}

#[allow(clippy::too_many_arguments)]
pub fn multi_view_loss(
    z_f: &Matrix,
    z_t: &Matrix,
    s_f: &Matrix,
    s_t: &Matrix,
    corrupted_f: &Matrix,
    corrupted_t: &Matrix,
    w_ft: &Matrix,
    w_tf: &Matrix,
) -> Result<f32> {
    let a = js_mi_objective(z_f, s_t, corrupted_f, w_ft)?;
    let b = js_mi_objective(z_t, s_f, corrupted_t, w_tf)?;
    Ok(a + b)
}

pub fn common_mi_var(tape: &mut Tape, bundle: &ForwardBundle, w_c: Var) -> Result<Var> {
    let corrupted = bundle
        .corrupted
        .as_ref()
        .ok_or_else(|| Error::contract("common MI loss needs corrupted patches"))?;
    js_mi_var(tape, bundle.z_c, bundle.s_c, corrupted.z_c, w_c)
}

pub fn common_mi_loss(z_c: &Matrix, s_c: &Matrix, corrupted_c: &Matrix, w_c: &Matrix) -> Result<f32> {
    js_mi_objective(z_c, s_c, corrupted_c, w_c)
}

/// Draws `per_node` positive and negative partners for every node in both
/// views. `adj_f` and `adj_t` are sorted neighbor lists.
pub fn sample_pairs(
    adj_f: &[Vec<usize>],
    adj_t: &[Vec<usize>],
    per_node: usize,
    rng: &mut Rng,
) -> Result<PairSample> {
    if adj_f.len() != adj_t.len() {
        return Err(Error::Dimension {
            op: "sample_pairs",
            left: (adj_f.len(), 0),
            right: (adj_t.len(), 0),
        });
    }
    Ok(PairSample {
        feature: sample_view(adj_f, per_node, rng, "feature"),
        topology: sample_view(adj_t, per_node, rng, "topology"),
    })
}

fn sample_view(adj: &[Vec<usize>], per_node: usize, rng: &mut Rng, view: &str) -> ViewPairs {
    let n = adj.len();
    let mut out = ViewPairs::default();
    let mut any_edge = false;
    let mut any_non_edge = false;
    for (i, nb) in adj.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        any_edge = true;
        let non_neighbors = n - 1 - nb.len();
        any_non_edge |= non_neighbors > 0;
        for _ in 0..per_node {
            out.positives.push((i, nb[rng.random_range(0..nb.len())]));
            if non_neighbors == 0 {
                continue;
            }
            let mut pick = None;
            for _ in 0..REJECTION_TRIES {
                let j = rng.random_range(0..n);
                if j != i && nb.binary_search(&j).is_err() {
                    pick = Some(j);
                    break;
                }
            }
            let j = pick.unwrap_or_else(|| {
                let k = rng.random_range(0..non_neighbors);
                (0..n)
                    .filter(|&j| j != i && nb.binary_search(&j).is_err())
                    .nth(k)
                    .expect("counted non-neighbors")
            });
            out.negatives.push((i, j));
        }
    }
    if !any_edge {
        log::warn!("{view} view has no edges; it contributes no reconstruction pairs");
    } else if !any_non_edge {
        log::warn!("{view} view is complete; it contributes no negative pairs");
    }
    out
}

fn pair_index(pairs: &[(usize, usize)]) -> (Arc<Vec<usize>>, Arc<Vec<usize>>) {
    (
        Arc::new(pairs.iter().map(|p| p.0).collect()),
        Arc::new(pairs.iter().map(|p| p.1).collect()),
    )
}

/// Mean of `−log max(σ(±z_i·z_j), floor)` over `pairs`; `None` when empty.
fn pair_term(tape: &mut Tape, z: Var, pairs: &[(usize, usize)], positive: bool) -> Result<Option<Var>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let (a, b) = pair_index(pairs);
    let za = tape.gather_rows(z, &a)?;
    let zb = tape.gather_rows(z, &b)?;
    let dots = tape.row_dot(za, zb)?;
    let signed = if positive { dots } else { tape.neg(dots) };
    let p = tape.sigmoid(signed);
    let logp = tape.log_clamped(p, PROB_FLOOR);
    let m = tape.mean(logp);
    Ok(Some(tape.neg(m)))
}

/// Sampled cross-entropy of the inner-product decoder on `z_c` against both
/// views' edges.
pub fn reconstruction_var(tape: &mut Tape, z_c: Var, pairs: &PairSample) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for view in [&pairs.feature, &pairs.topology] {
        for (list, positive) in [(&view.positives, true), (&view.negatives, false)] {
            if let Some(t) = pair_term(tape, z_c, list, positive)? {
                acc = Some(match acc {
                    None => t,
                    Some(a) => tape.add(a, t)?,
                });
            }
        }
    }
    match acc {
        Some(v) => Ok(v),
        None => Err(Error::contract("reconstruction loss needs at least one pair")),
    }
}

pub fn reconstruction_loss(decoder: &InnerProductDecoder<'_>, pairs: &PairSample) -> Result<f32> {
    let mut tape = Tape::new();
    let z = tape.constant(decoder.embeddings().clone());
    let v = reconstruction_var(&mut tape, z, pairs)?;
    Ok(tape.value(v).item())
}

/// `−(mean cos(z_f, z_cf) + mean cos(z_t, z_ct))`.
pub fn disagreement_var(tape: &mut Tape, z_f: Var, z_cf: Var, z_t: Var, z_ct: Var) -> Result<Var> {
    let cf = tape.row_cosine(z_f, z_cf)?;
    let ct = tape.row_cosine(z_t, z_ct)?;
    let mf = tape.mean(cf);
    let mt = tape.mean(ct);
    let s = tape.add(mf, mt)?;
    Ok(tape.neg(s))
}

pub fn disagreement_loss(z_f: &Matrix, z_cf: &Matrix, z_t: &Matrix, z_ct: &Matrix) -> Result<f32> {
    let mut tape = Tape::new();
    let vars = [z_f, z_cf, z_t, z_ct].map(|m| tape.constant(m.clone()));
    let v = disagreement_var(&mut tape, vars[0], vars[1], vars[2], vars[3])?;
    Ok(tape.value(v).item())
}

/// `−(l_mmi + λ_c·(l_cmi − l_r) + λ_d·l_d)` in the same f32 operation order
/// as [`total_var`].
pub fn total_loss(l_mmi: f32, l_cmi: f32, l_r: f32, l_d: f32, lambda_c: f32, lambda_d: f32) -> f32 {
    let common = (l_cmi - l_r) * lambda_c;
    let reg = l_d * lambda_d;
    -((l_mmi + common) + reg)
}

pub fn total_var(
    tape: &mut Tape,
    l_mmi: Var,
    l_cmi: Var,
    l_r: Var,
    l_d: Var,
    lambda_c: f32,
    lambda_d: f32,
) -> Result<Var> {
    let diff = tape.sub(l_cmi, l_r)?;
    let common = tape.scale(diff, lambda_c);
    let reg = tape.scale(l_d, lambda_d);
    let a = tape.add(l_mmi, common)?;
    let b = tape.add(a, reg)?;
    Ok(tape.neg(b))
}
