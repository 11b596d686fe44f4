//! Parameterized pieces of the model: single-layer GCN view encoders, the
//! weight-sharing common encoder with its fusion layer, mean readouts,
//! bilinear discriminators, and the inner-product decoder.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, Matrix, Rng, SparseMatrix, Tape, Var};

/// Initial PReLU slope.
pub const PRELU_INIT: f32 = 0.25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Feature/topology multi-view model with the common module.
    #[default]
    Mvmift,
    /// Single topology-view baseline.
    Dgi,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Mvmift => "mvmift",
            ModelKind::Dgi => "dgi",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvmift" => Ok(ModelKind::Mvmift),
            "dgi" => Ok(ModelKind::Dgi),
            other => Err(Error::contract(format!(
                "unknown model {other:?} (expected mvmift or dgi)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvmiftParams {
    pub theta_f: Matrix,
    pub theta_t: Matrix,
    pub theta_c: Matrix,
    /// Fusion layer weight, 2h×h, applied to `[Z_cf ∥ Z_ct]`.
    pub fusion_w: Matrix,
    pub fusion_b: Matrix,
    /// Discriminator for feature patches against the topology summary.
    pub disc_ft: Matrix,
    /// Discriminator for topology patches against the feature summary.
    pub disc_tf: Matrix,
    pub disc_c: Matrix,
    pub slope_f: Matrix,
    pub slope_t: Matrix,
    pub slope_c: Matrix,
    pub slope_fusion: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgiParams {
    pub theta: Matrix,
    pub slope: Matrix,
    pub disc: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Mvmift(MvmiftParams),
    Dgi(DgiParams),
}

const MVMIFT_NAMES: [&str; 12] = [
    "theta_f",
    "theta_t",
    "theta_c",
    "fusion_w",
    "fusion_b",
    "disc_ft",
    "disc_tf",
    "disc_c",
    "slope_f",
    "slope_t",
    "slope_c",
    "slope_fusion",
];
const DGI_NAMES: [&str; 3] = ["theta", "slope", "disc"];

impl ModelParams {
    /// Glorot weights, zero biases, PReLU slopes at 0.25.
    pub fn init(kind: ModelKind, input_dim: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let (d, h) = (input_dim, hidden);
        Ok(match kind {
            ModelKind::Mvmift => ModelParams::Mvmift(MvmiftParams {
                theta_f: glorot_uniform(d, h, rng)?,
                theta_t: glorot_uniform(d, h, rng)?,
                theta_c: glorot_uniform(d, h, rng)?,
                fusion_w: glorot_uniform(2 * h, h, rng)?,
                fusion_b: Matrix::zeros(1, h),
                disc_ft: glorot_uniform(h, h, rng)?,
                disc_tf: glorot_uniform(h, h, rng)?,
                disc_c: glorot_uniform(h, h, rng)?,
                slope_f: Matrix::scalar(PRELU_INIT),
                slope_t: Matrix::scalar(PRELU_INIT),
                slope_c: Matrix::scalar(PRELU_INIT),
                slope_fusion: Matrix::scalar(PRELU_INIT),
            }),
            ModelKind::Dgi => ModelParams::Dgi(DgiParams {
                theta: glorot_uniform(d, h, rng)?,
                slope: Matrix::scalar(PRELU_INIT),
                disc: glorot_uniform(h, h, rng)?,
            }),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Mvmift(_) => ModelKind::Mvmift,
            ModelParams::Dgi(_) => ModelKind::Dgi,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            ModelParams::Mvmift(p) => p.theta_t.cols(),
            ModelParams::Dgi(p) => p.theta.cols(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelParams::Mvmift(p) => p.theta_t.rows(),
            ModelParams::Dgi(p) => p.theta.rows(),
        }
    }

    /// Parameters in their fixed serialization order.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            ModelParams::Mvmift(p) => MVMIFT_NAMES
                .into_iter()
                .zip([
                    &p.theta_f,
                    &p.theta_t,
                    &p.theta_c,
                    &p.fusion_w,
                    &p.fusion_b,
                    &p.disc_ft,
                    &p.disc_tf,
                    &p.disc_c,
                    &p.slope_f,
                    &p.slope_t,
                    &p.slope_c,
                    &p.slope_fusion,
                ])
                .collect(),
            ModelParams::Dgi(p) => DGI_NAMES.into_iter().zip([&p.theta, &p.slope, &p.disc]).collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            ModelParams::Mvmift(p) => vec![
                &mut p.theta_f,
                &mut p.theta_t,
                &mut p.theta_c,
                &mut p.fusion_w,
                &mut p.fusion_b,
                &mut p.disc_ft,
                &mut p.disc_tf,
                &mut p.disc_c,
                &mut p.slope_f,
                &mut p.slope_t,
                &mut p.slope_c,
                &mut p.slope_fusion,
            ],
            ModelParams::Dgi(p) => vec![&mut p.theta, &mut p.slope, &mut p.disc],
        }
    }

    /// Rebuilds parameters from named tensors, checking names, order, and shapes.
    pub fn from_tensors(kind: ModelKind, tensors: Vec<(String, Matrix)>) -> Result<Self> {
        let names: &[&str] = match kind {
            ModelKind::Mvmift => &MVMIFT_NAMES,
            ModelKind::Dgi => &DGI_NAMES,
        };
        if tensors.len() != names.len()
            || tensors.iter().zip(names).any(|((a, _), b)| a != b)
        {
            return Err(Error::contract(format!(
                "expected tensors {names:?} for model {kind}"
            )));
        }
        let mut it = tensors.into_iter().map(|(_, m)| m);
        let mut next = || it.next().expect("length checked");
        let params = match kind {
            ModelKind::Mvmift => ModelParams::Mvmift(MvmiftParams {
                theta_f: next(),
                theta_t: next(),
                theta_c: next(),
                fusion_w: next(),
                fusion_b: next(),
                disc_ft: next(),
                disc_tf: next(),
                disc_c: next(),
                slope_f: next(),
                slope_t: next(),
                slope_c: next(),
                slope_fusion: next(),
            }),
            ModelKind::Dgi => ModelParams::Dgi(DgiParams {
                theta: next(),
                slope: next(),
                disc: next(),
            }),
        };
        params.check_shapes()?;
        Ok(params)
    }

    fn check_shapes(&self) -> Result<()> {
        let (d, h) = (self.input_dim(), self.hidden());
        let expect: Vec<(usize, usize)> = match self {
            ModelParams::Mvmift(_) => vec![
                (d, h),
                (d, h),
                (d, h),
                (2 * h, h),
                (1, h),
                (h, h),
                (h, h),
                (h, h),
                (1, 1),
                (1, 1),
                (1, 1),
                (1, 1),
            ],
            ModelParams::Dgi(_) => vec![(d, h), (1, 1), (h, h)],
        };
        for ((name, m), shape) in self.tensors().into_iter().zip(expect) {
            if m.shape() != shape {
                return Err(Error::contract(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if !m.is_finite() {
                return Err(Error::contract(format!("tensor {name} is not finite")));
            }
        }
        Ok(())
    }
}

/// Fixed graph-side inputs shared by every forward pass.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    /// Node features in sparse form (dense features simply store every entry).
    pub features: Arc<SparseMatrix>,
    /// Normalized topology adjacency.
    pub adj_topology: Arc<SparseMatrix>,
    /// Normalized feature-graph adjacency; unused by the single-view baseline.
    pub adj_feature: Arc<SparseMatrix>,
}

impl GraphInputs {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// Parameter handles on a tape, in [`ModelParams::tensors`] order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> Self {
        let vars = params
            .tensors()
            .into_iter()
            .map(|(_, m)| tape.param(m.clone()))
            .collect();
        Self { vars }
    }
}

/// Patch and summary nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardBundle {
    pub z_f: Var,
    pub z_t: Var,
    pub z_cf: Var,
    pub z_ct: Var,
    pub z_c: Var,
    pub s_f: Var,
    pub s_t: Var,
    pub s_c: Var,
    pub corrupted: Option<CorruptedBundle>,
}

/// Patches computed from row-shuffled features over unchanged adjacencies.
#[derive(Clone, Debug)]
pub struct CorruptedBundle {
    pub z_f: Var,
    pub z_t: Var,
    pub z_c: Var,
}

#[derive(Clone, Debug)]
pub struct DgiBundle {
    pub z: Var,
    pub s: Var,
    pub corrupted: Option<Var>,
}

/// Pre-activations `Â·X·Θ` for every `(Â, Θ)` pair, with the rows of X
/// permuted by `perm` when given. Narrow features are propagated first
/// (`(Â·X)·Θ`); otherwise `X·Θ` is formed once per weight and propagated.
fn pre_activations(
    tape: &mut Tape,
    features: &Arc<SparseMatrix>,
    adjs: &[&Arc<SparseMatrix>],
    pairs: &[(usize, Var)],
    perm: Option<&Arc<Vec<usize>>>,
) -> Result<Vec<Var>> {
    let h = pairs.first().map_or(0, |&(_, t)| tape.value(t).cols());
    if features.cols() < h {
        let mut x = features.to_dense();
        if let Some(p) = perm {
            x = x.permute_rows(p)?;
        }
        let mut ax = Vec::with_capacity(adjs.len());
        for adj in adjs {
            ax.push(tape.constant(adj.spmm(&x)?));
        }
        return pairs.iter().map(|&(a, t)| tape.matmul(ax[a], t)).collect();
    }
    let mut products: Vec<(Var, Var)> = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    for &(a, t) in pairs {
        let xw = match products.iter().find(|(theta, _)| *theta == t) {
            Some(&(_, xw)) => xw,
            None => {
                let mut xw = tape.spmm(features, t)?;
                if let Some(p) = perm {
                    xw = tape.gather_rows(xw, p)?;
                }
                products.push((t, xw));
                xw
            }
        };
        out.push(tape.spmm(adjs[a], xw)?);
    }
    Ok(out)
}

fn fuse(tape: &mut Tape, z_cf: Var, z_ct: Var, w: Var, b: Var, slope: Var) -> Result<Var> {
    let cat = tape.concat_cols(z_cf, z_ct)?;
    let lin = tape.matmul(cat, w)?;
    let lin = tape.add_row(lin, b)?;
    tape.prelu(lin, slope)
}

/// `σ(mean of rows)`.
pub fn readout_var(tape: &mut Tape, z: Var) -> Var {
    let m = tape.mean_rows(z);
    tape.sigmoid(m)
}

/// Full multi-view forward pass. With `perm`, also encodes the corrupted
/// graph whose feature rows are permuted by `perm`.
pub fn forward_mvmift(
    tape: &mut Tape,
    inputs: &GraphInputs,
    bound: &BoundParams,
    perm: Option<&Arc<Vec<usize>>>,
) -> Result<ForwardBundle> {
    let v = &bound.vars;
    if v.len() != MVMIFT_NAMES.len() {
        return Err(Error::contract("parameters are not a multi-view model"));
    }
    let (theta_f, theta_t, theta_c) = (v[0], v[1], v[2]);
    let (fusion_w, fusion_b) = (v[3], v[4]);
    let (slope_f, slope_t, slope_c, slope_m) = (v[8], v[9], v[10], v[11]);

    let adjs = [&inputs.adj_feature, &inputs.adj_topology];
    let pairs = [(0, theta_f), (1, theta_t), (0, theta_c), (1, theta_c)];
    let slopes = [slope_f, slope_t, slope_c, slope_c];
    let encode = |tape: &mut Tape, perm| -> Result<[Var; 5]> {
        let pre = pre_activations(tape, &inputs.features, &adjs, &pairs, perm)?;
        let mut z = [pre[0]; 4];
        for i in 0..4 {
            z[i] = tape.prelu(pre[i], slopes[i])?;
        }
        let z_c = fuse(tape, z[2], z[3], fusion_w, fusion_b, slope_m)?;
        Ok([z[0], z[1], z[2], z[3], z_c])
    };

    let [z_f, z_t, z_cf, z_ct, z_c] = encode(tape, None)?;
    let s_f = readout_var(tape, z_f);
    let s_t = readout_var(tape, z_t);
    let s_c = readout_var(tape, z_c);

    let corrupted = match perm {
        None => None,
        Some(p) => {
            let [nz_f, nz_t, _, _, nz_c] = encode(tape, Some(p))?;
            Some(CorruptedBundle {
                z_f: nz_f,
                z_t: nz_t,
                z_c: nz_c,
            })
        }
    };

    Ok(ForwardBundle {
        z_f,
        z_t,
        z_cf,
        z_ct,
        z_c,
        s_f,
        s_t,
        s_c,
        corrupted,
    })
}

/// Single-view baseline forward pass over the topology adjacency.
pub fn forward_dgi(
    tape: &mut Tape,
    inputs: &GraphInputs,
    bound: &BoundParams,
    perm: Option<&Arc<Vec<usize>>>,
) -> Result<DgiBundle> {
    let v = &bound.vars;
    if v.len() != DGI_NAMES.len() {
        return Err(Error::contract("parameters are not a single-view model"));
    }
    let (theta, slope) = (v[0], v[1]);
    let adjs = [&inputs.adj_topology];
    let pre = pre_activations(tape, &inputs.features, &adjs, &[(0, theta)], None)?;
    let z = tape.prelu(pre[0], slope)?;
    let s = readout_var(tape, z);
    let corrupted = match perm {
        None => None,
        Some(p) => {
            let pre = pre_activations(tape, &inputs.features, &adjs, &[(0, theta)], Some(p))?;
            Some(tape.prelu(pre[0], slope)?)
        }
    };
    Ok(DgiBundle { z, s, corrupted })
}

/// `PReLU(Â·X·Θ)` on plain matrices.
pub fn encode_view(
    norm_adj: &SparseMatrix,
    x: &Matrix,
    theta: &Matrix,
    slope: f32,
) -> Result<Matrix> {
    let mut tape = Tape::new();
    let adj = Arc::new(norm_adj.clone());
    let xs = Arc::new(SparseMatrix::from_dense(x));
    let t = tape.constant(theta.clone());
    let a = tape.constant(Matrix::scalar(slope));
    let pre = pre_activations(&mut tape, &xs, &[&adj], &[(0, t)], None)?;
    let z = tape.prelu(pre[0], a)?;
    Ok(tape.value(z).clone())
}

/// Weight-sharing common encoder on both views plus the fusion layer;
/// returns `(Z_cf, Z_ct, Z_c)`.
#[allow(clippy::too_many_arguments)]
pub fn encode_common(
    norm_adj_f: &SparseMatrix,
    norm_adj_t: &SparseMatrix,
    x: &Matrix,
    theta_c: &Matrix,
    slope_c: f32,
    fusion_w: &Matrix,
    fusion_b: &Matrix,
    slope_fusion: f32,
) -> Result<(Matrix, Matrix, Matrix)> {
    let mut tape = Tape::new();
    let af = Arc::new(norm_adj_f.clone());
    let at = Arc::new(norm_adj_t.clone());
    let xs = Arc::new(SparseMatrix::from_dense(x));
    let t = tape.constant(theta_c.clone());
    let a = tape.constant(Matrix::scalar(slope_c));
    let w = tape.constant(fusion_w.clone());
    let b = tape.constant(fusion_b.clone());
    let am = tape.constant(Matrix::scalar(slope_fusion));
    let pre = pre_activations(&mut tape, &xs, &[&af, &at], &[(0, t), (1, t)], None)?;
    let z_cf = tape.prelu(pre[0], a)?;
    let z_ct = tape.prelu(pre[1], a)?;
    let z_c = fuse(&mut tape, z_cf, z_ct, w, b, am)?;
    Ok((
        tape.value(z_cf).clone(),
        tape.value(z_ct).clone(),
        tape.value(z_c).clone(),
    ))
}

/// Summary vector `σ(mean of rows of z)` as a 1×h row.
pub fn readout(z: &Matrix) -> Result<Matrix> {
    if z.rows() == 0 {
        return Err(Error::contract("readout of an empty patch matrix"));
    }
    let mut tape = Tape::new();
    let v = tape.constant(z.clone());
    let s = readout_var(&mut tape, v);
    Ok(tape.value(s).clone())
}

/// Bilinear discriminator logit `zᵀ W s`.
pub fn discriminate(z: &[f32], s: &[f32], w: &Matrix) -> Result<f64> {
    if w.rows() != z.len() || w.cols() != s.len() {
        return Err(Error::Dimension {
            op: "discriminate",
            left: (z.len(), s.len()),
            right: w.shape(),
        });
    }
    let mut total = 0f64;
    for (i, &zi) in z.iter().enumerate() {
        let ws: f64 = w.row(i).iter().zip(s).map(|(&a, &b)| a as f64 * b as f64).sum();
        total += zi as f64 * ws;
    }
    Ok(total)
}

/// Lazily evaluated `σ(z_i · z_j)` over the rows of an embedding.
#[derive(Clone, Copy, Debug)]
pub struct InnerProductDecoder<'a> {
    z: &'a Matrix,
}

impl<'a> InnerProductDecoder<'a> {
    pub fn new(z: &'a Matrix) -> Self {
        Self { z }
    }

    pub fn embeddings(&self) -> &'a Matrix {
        self.z
    }

    pub fn logit(&self, i: usize, j: usize) -> f64 {
        crate::numerics::tape::dot64(self.z.row(i), self.z.row(j))
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        1.0 / (1.0 + (-self.logit(i, j)).exp())
    }
}

/// Elementwise mean of the three representations used at inference time.
pub fn aggregate_inference(z_f: &Matrix, z_t: &Matrix, z_c: &Matrix) -> Result<Matrix> {
    for other in [z_t, z_c] {
        if other.shape() != z_f.shape() {
            return Err(Error::Dimension {
                op: "aggregate_inference",
                left: z_f.shape(),
                right: other.shape(),
            });
        }
    }
    let data = z_f
        .data()
        .iter()
        .zip(z_t.data())
        .zip(z_c.data())
        .map(|((&a, &b), &c)| ((a as f64 + b as f64 + c as f64) / 3.0) as f32)
        .collect();
    Matrix::from_vec(z_f.rows(), z_f.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::normalize;
    use crate::numerics::seeded_rng;
    use rand::Rng as _;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_features_encode_to_zero() {
        let adj = normalize(&[(0, 1)], 2).unwrap().into_matrix();
        let z = encode_view(&adj, &Matrix::zeros(2, 3), &Matrix::filled(3, 4, 0.7), 0.25).unwrap();
        assert_eq!(z, Matrix::zeros(2, 4));
    }

    #[test]
    fn single_node_identity() {
        let adj = normalize(&[], 1).unwrap().into_matrix();
        let x = Matrix::from_rows(&[[0.5, 2.0, 0.0]]);
        let z = encode_view(&adj, &x, &Matrix::identity(3), 0.25).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn single_edge_pre_activation() {
        let adj = normalize(&[(0, 1)], 2).unwrap().into_matrix();
        // slope 1 makes PReLU the identity, exposing the pre-activation.
        let z = encode_view(&adj, &Matrix::identity(2), &Matrix::identity(2), 1.0).unwrap();
        assert_eq!(z, Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]));
    }

    #[test]
    fn encoder_shape_mismatch() {
        let adj = normalize(&[], 2).unwrap().into_matrix();
        let err = encode_view(&adj, &Matrix::zeros(2, 3), &Matrix::zeros(4, 2), 0.25).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn common_encoder_zero_and_sharing() {
        let mut rng = seeded_rng(3);
        let adj = normalize(&[(0, 1), (1, 2)], 3).unwrap().into_matrix();
        let theta = random(2, 4, &mut rng);
        let w = random(8, 4, &mut rng);
        let b = Matrix::zeros(1, 4);
        let (cf, ct, c) =
            encode_common(&adj, &adj, &Matrix::zeros(3, 2), &theta, 0.25, &w, &b, 0.25).unwrap();
        assert_eq!(cf, Matrix::zeros(3, 4));
        assert_eq!(ct, Matrix::zeros(3, 4));
        assert_eq!(c, Matrix::zeros(3, 4));

        let x = random(3, 2, &mut rng);
        let (cf, ct, _) = encode_common(&adj, &adj, &x, &theta, 0.25, &w, &b, 0.25).unwrap();
        assert_eq!(
            cf.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            ct.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn readout_examples() {
        let s = readout(&Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]])).unwrap();
        for &v in s.data() {
            assert!((v - 0.731_058_6).abs() < 1e-6);
        }
        let z = Matrix::from_rows(&[[0.3, -1.0]]);
        let s = readout(&z).unwrap();
        assert!((s.get(0, 0) - 1.0 / (1.0 + (-0.3f32).exp())).abs() < 1e-7);
        let same = readout(&Matrix::from_rows(&[[0.3, -1.0], [0.3, -1.0]])).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn discriminator_examples() {
        let z = [0.2f32, -0.4, 1.0];
        assert_eq!(discriminate(&z, &z, &Matrix::zeros(3, 3)).unwrap(), 0.0);
        let e1 = [1.0f32, 0.0, 0.0];
        assert_eq!(discriminate(&e1, &e1, &Matrix::identity(3)).unwrap(), 1.0);

        let mut rng = seeded_rng(8);
        let w = random(3, 3, &mut rng);
        let s = [0.7f32, 0.1, -0.3];
        let mut oracle = 0f64;
        for i in 0..3 {
            for j in 0..3 {
                oracle += z[i] as f64 * w.get(i, j) as f64 * s[j] as f64;
            }
        }
        assert!((discriminate(&z, &s, &w).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn decoder_examples() {
        let zero = Matrix::zeros(2, 3);
        assert_eq!(InnerProductDecoder::new(&zero).prob(0, 1), 0.5);
        let z = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, -1.0]]);
        let dec = InnerProductDecoder::new(&z);
        assert!((dec.prob(0, 1) - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert_eq!(dec.prob(0, 2), 0.5);
        assert_eq!(dec.prob(1, 2), dec.prob(2, 1));
    }

    #[test]
    fn aggregation_examples() {
        let a = Matrix::filled(2, 2, 1.0);
        let b = Matrix::filled(2, 2, 2.0);
        let c = Matrix::filled(2, 2, 3.0);
        assert_eq!(aggregate_inference(&a, &b, &c).unwrap(), b);
        assert_eq!(aggregate_inference(&b, &b, &b).unwrap(), b);
        let mut rng = seeded_rng(1);
        let (x, y, z) = (random(3, 2, &mut rng), random(3, 2, &mut rng), random(3, 2, &mut rng));
        let m = aggregate_inference(&x, &y, &z).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let o = (x.get(i, j) as f64 + y.get(i, j) as f64 + z.get(i, j) as f64) / 3.0;
                assert!((m.get(i, j) as f64 - o).abs() < 1e-7);
            }
        }
        assert!(aggregate_inference(&a, &Matrix::zeros(1, 2), &c).is_err());
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        let mut rng = seeded_rng(12);
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3), (1, 4)];
        let n = 5;
        let x = random(n, 3, &mut rng);
        let theta = random(3, 4, &mut rng);
        let perm = [3usize, 0, 4, 1, 2]; // new node i is old node perm[i]
        let mut inv = [0usize; 5];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let pedges: Vec<_> = edges.iter().map(|&(a, b)| (inv[a], inv[b])).collect();
        let z = encode_view(&normalize(&edges, n).unwrap().into_matrix(), &x, &theta, 0.25).unwrap();
        let zp = encode_view(
            &normalize(&pedges, n).unwrap().into_matrix(),
            &x.permute_rows(&perm).unwrap(),
            &theta,
            0.25,
        )
        .unwrap();
        assert!(zp.max_abs_diff(&z.permute_rows(&perm).unwrap()) < 1e-6);
        let s = readout(&z).unwrap();
        let sp = readout(&zp).unwrap();
        assert!(s.max_abs_diff(&sp) < 1e-6);
    }

    #[test]
    fn params_round_trip_through_tensors() {
        let p = ModelParams::init(ModelKind::Mvmift, 5, 4, &mut seeded_rng(0)).unwrap();
        let named: Vec<(String, Matrix)> =
            p.tensors().into_iter().map(|(n, m)| (n.to_string(), m.clone())).collect();
        assert_eq!(ModelParams::from_tensors(ModelKind::Mvmift, named.clone()).unwrap(), p);
        assert!(ModelParams::from_tensors(ModelKind::Dgi, named).is_err());
    }

    /// Dense f64 oracle for `PReLU(Â·X·Θ)`.
    fn dense_encode(adj: &Matrix, x: &Matrix, theta: &Matrix, slope: f64) -> Vec<Vec<f64>> {
        let n = x.rows();
        let mut out = vec![vec![0.0; theta.cols()]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..x.cols() {
                    for c in 0..theta.cols() {
                        out[i][c] += adj.get(i, j) as f64 * x.get(j, k) as f64 * theta.get(k, c) as f64;
                    }
                }
            }
        }
        for row in &mut out {
            row.iter_mut().filter(|v| **v < 0.0).for_each(|v| *v *= slope);
        }
        out
    }

    #[test]
    fn narrow_and_wide_features_match_oracle() {
        let mut rng = seeded_rng(21);
        let adj = normalize(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4).unwrap().into_matrix();
        for (d, h) in [(2, 5), (6, 3), (3, 3)] {
            let x = random(4, d, &mut rng);
            let theta = random(d, h, &mut rng);
            let z = encode_view(&adj, &x, &theta, 0.25).unwrap();
            let want = dense_encode(&adj.to_dense(), &x, &theta, 0.25);
            for (i, row) in want.iter().enumerate() {
                for (c, &w) in row.iter().enumerate() {
                    assert!((z.get(i, c) as f64 - w).abs() < 1e-6, "d={d} h={h}");
                }
            }
        }
    }

    /// Path 0–1–2 as topology and {0,2} as the feature view.
    fn three_node_common() -> (Matrix, Matrix, Matrix, Matrix, Matrix, Matrix) {
        let at = normalize(&[(0, 1), (1, 2)], 3).unwrap().into_matrix().to_dense();
        let af = normalize(&[(0, 2)], 3).unwrap().into_matrix().to_dense();
        let mut rng = seeded_rng(5);
        let x = random(3, 2, &mut rng);
        let theta = random(2, 3, &mut rng);
        let w = random(6, 3, &mut rng);
        let b = random(1, 3, &mut rng);
        (af, at, x, theta, w, b)
    }

    #[test]
    fn three_node_common_golden() {
        let (af, at, x, theta, w, b) = three_node_common();
        let (sf, st) = (SparseMatrix::from_dense(&af), SparseMatrix::from_dense(&at));
        let (cf, ct, c) = encode_common(&sf, &st, &x, &theta, 0.25, &w, &b, 0.25).unwrap();

        let zf = dense_encode(&af, &x, &theta, 0.25);
        let zt = dense_encode(&at, &x, &theta, 0.25);
        for i in 0..3 {
            for k in 0..3 {
                assert!((cf.get(i, k) as f64 - zf[i][k]).abs() < 1e-6);
                assert!((ct.get(i, k) as f64 - zt[i][k]).abs() < 1e-6);
                let mut v = b.get(0, k) as f64;
                for j in 0..3 {
                    v += zf[i][j] * w.get(j, k) as f64 + zt[i][j] * w.get(3 + j, k) as f64;
                }
                let v = if v < 0.0 { 0.25 * v } else { v };
                assert!((c.get(i, k) as f64 - v).abs() < 1e-6);
            }
        }
        crate::golden::check("three_node_zc.txt", &crate::golden::matrix_rows(&c));
    }
}
