//! Feature-view graph: each node links to its `K` most similar nodes in
//! feature space, and the selections are symmetrized by union.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::contract(format!(
                "unknown metric {other:?} (expected cosine or euclidean)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGraph {
    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub k: usize,
    pub metric: Metric,
}

/// `x·y / (‖x‖·‖y‖)`, or 0 when either vector is zero.
pub fn cosine_similarity(x: &[f32], y: &[f32]) -> f64 {
    crate::numerics::tape::cosine64(x, y).0
}

/// Dense n×n cosine similarity matrix. Only meant for small inputs and
/// inspection; graph construction streams rows instead.
pub fn similarity_matrix(features: &Matrix) -> Matrix {
    let n = features.rows();
    let unit = unit_rows(features);
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, dot(&unit[i], &unit[j]).clamp(-1.0, 1.0) as f32);
        }
    }
    s
}

fn unit_rows(features: &Matrix) -> Vec<Vec<f64>> {
    (0..features.rows())
        .map(|r| {
            let row: Vec<f64> = features.row(r).iter().map(|&v| v as f64).collect();
            let norm = dot(&row, &row).sqrt();
            if norm == 0.0 {
                row
            } else {
                row.into_iter().map(|v| v / norm).collect()
            }
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the symmetrized KNN graph. Self is never a candidate and ties go
/// to the lower node index. Under the cosine metric, all-zero rows select
/// no neighbors (they can still be selected by others).
pub fn build_knn_graph(features: &Matrix, k: usize, metric: Metric) -> Result<FeatureGraph> {
    let n = features.rows();
    if k >= n.max(1) && k > 0 {
        return Err(Error::contract(format!(
            "K = {k} must be smaller than the node count {n}"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    if k > 0 {
        let rows: Vec<Vec<f64>> = match metric {
            Metric::Cosine => unit_rows(features),
            Metric::Euclidean => (0..n)
                .map(|r| features.row(r).iter().map(|&v| v as f64).collect())
                .collect(),
        };
        let sq: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
        // Per-column lists of (row, value) over nonzeros. Accumulating a
        // row's products column by column adds the same terms in the same
        // order as a dense dot product, skipping only exact zeros.
        let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); features.cols()];
        for (j, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    postings[c].push((j, v));
                }
            }
        }
        let mut dots = vec![0f64; n];
        let mut scores: Vec<(f64, usize)> = Vec::with_capacity(n);
        for i in 0..n {
            if metric == Metric::Cosine && sq[i] == 0.0 {
                continue;
            }
            dots.iter_mut().for_each(|d| *d = 0.0);
            for (c, &v) in rows[i].iter().enumerate() {
                if v != 0.0 {
                    for &(j, w) in &postings[c] {
                        dots[j] += v * w;
                    }
                }
            }
            scores.clear();
            for (j, &d) in dots.iter().enumerate() {
                if j == i {
                    continue;
                }
                // Higher score = closer.
                let s = match metric {
                    Metric::Cosine => d,
                    Metric::Euclidean => -(sq[i] + sq[j] - 2.0 * d).max(0.0),
                };
                scores.push((s, j));
            }
            let by_rank = |a: &(f64, usize), b: &(f64, usize)| {
                b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
            };
            scores.select_nth_unstable_by(k - 1, by_rank);
            for &(_, j) in &scores[..k] {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(FeatureGraph { edges, k, metric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::adjacency_lists;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -1.2], &[0.3, -1.2]) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn k_zero_is_empty() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]);
        assert!(build_knn_graph(&x, 0, Metric::Cosine).unwrap().edges.is_empty());
    }

    #[test]
    fn k_at_least_n_is_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]);
        assert!(matches!(build_knn_graph(&x, 2, Metric::Cosine), Err(Error::Contract(_))));
    }

    #[test]
    fn three_point_example() {
        // Brute force: cos(0,1)=0.9939, cos(0,2)=0, cos(1,2)=0.1104,
        // so picks are 0→1, 1→0, 2→1.
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]);
        let g = build_knn_graph(&x, 1, Metric::Cosine).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        let g = build_knn_graph(&x, 1, Metric::Cosine).unwrap();
        // 0 picks 1; 1, 2, 3 pick 0.
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn zero_rows_only_receive_edges() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let g = build_knn_graph(&x, 1, Metric::Cosine).unwrap();
        // 1 and 2 are orthogonal (0) and tie with the zero row 0 (also 0);
        // lower index wins, so both pick node 0.
        assert_eq!(g.edges, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn similarity_matrix_properties() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5], [0.0, 3.0]]);
        let s = similarity_matrix(&x);
        for i in 0..3 {
            assert!((s.get(i, i) - 1.0).abs() < 1e-6);
            for j in 0..3 {
                assert_eq!(s.get(i, j), s.get(j, i));
                assert!(s.get(i, j).abs() <= 1.0);
            }
        }
    }

    fn features(max_n: usize) -> impl Strategy<Value = Matrix> {
        (3..max_n, 1usize..6).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-5.0f32..5.0, n * d)
                .prop_map(move |v| Matrix::from_vec(n, d, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn symmetric_without_self_loops(x in features(30), k in 1usize..3) {
            let g = build_knn_graph(&x, k, Metric::Cosine).unwrap();
            let adj = adjacency_lists(&g.edges, x.rows());
            for (i, nb) in adj.iter().enumerate() {
                prop_assert!(!nb.contains(&i));
                for &j in nb {
                    prop_assert!(adj[j].contains(&i));
                }
                if x.row(i).iter().any(|&v| v != 0.0) {
                    prop_assert!(nb.len() >= k);
                }
            }
        }

        #[test]
        fn invariant_under_positive_row_scaling(
            x in features(25),
            scales in proptest::collection::vec(prop_oneof![Just(0.5f32), Just(2.0), Just(8.0), Just(0.125)], 25),
        ) {
            let mut y = x.clone();
            for r in 0..y.rows() {
                let s = scales[r];
                y.row_mut(r).iter_mut().for_each(|v| *v *= s);
            }
            let a = build_knn_graph(&x, 2, Metric::Cosine).unwrap();
            let b = build_knn_graph(&y, 2, Metric::Cosine).unwrap();
            prop_assert_eq!(a.edges, b.edges);
        }

        #[test]
        fn cosine_and_euclidean_agree_on_unit_rows(x in features(25)) {
            let mut u = x.clone();
            for r in 0..u.rows() {
                let norm = u.row(r).iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
                if norm == 0.0 {
                    u.row_mut(r)[0] = 1.0;
                } else {
                    u.row_mut(r).iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
                }
            }
            let a = build_knn_graph(&u, 1, Metric::Cosine).unwrap();
            let b = build_knn_graph(&u, 1, Metric::Euclidean).unwrap();
            prop_assert_eq!(a.edges, b.edges);
        }
    }
}
