//! Agreement between labelings (NMI, ARI) and internal cluster quality
//! (Calinski-Harabasz, silhouette).

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Relabels arbitrary ids to `0..k` in order of first appearance.
pub fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

struct Contingency {
    table: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            op: "contingency",
            left: (pred.len(), 1),
            right: (truth.len(), 1),
        });
    }
    if pred.is_empty() {
        return Err(Error::contract("labelings are empty"));
    }
    let (p, kp) = compact_labels(pred);
    let (t, kt) = compact_labels(truth);
    let mut table = vec![vec![0u64; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kt).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        table,
        rows,
        cols,
        n: pred.len() as u64,
    })
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with the geometric-mean normalization.
/// Two single-cluster labelings score 1; one single cluster against a
/// non-trivial labeling scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let n = c.n as f64;
    let (hp, ht) = (entropy(&c.rows, n), entropy(&c.cols, n));
    if c.rows.len() == 1 && c.cols.len() == 1 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index by pair counting. When the index is undefined
/// (both labelings trivial in the same way) it is 1.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let index: f64 = c.table.iter().flatten().map(|&v| comb2(v)).sum();
    let a: f64 = c.rows.iter().map(|&v| comb2(v)).sum();
    let b: f64 = c.cols.iter().map(|&v| comb2(v)).sum();
    let total = comb2(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn groups(points: &Matrix, assignment: &[usize]) -> Result<(Vec<usize>, usize)> {
    if points.rows() != assignment.len() {
        return Err(Error::Dimension {
            op: "cluster_quality",
            left: points.shape(),
            right: (assignment.len(), 1),
        });
    }
    let (a, k) = compact_labels(assignment);
    if k < 2 {
        return Err(Error::contract(format!("need at least 2 clusters, got {k}")));
    }
    if k >= points.rows() {
        return Err(Error::contract(format!(
            "need fewer clusters than points, got {k} for {}",
            points.rows()
        )));
    }
    Ok((a, k))
}

fn centroids(points: &Matrix, a: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = points.cols();
    let mut c = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in a.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in c[l].iter_mut().zip(points.row(i)) {
            *s += v as f64;
        }
    }
    for (ci, &n) in c.iter_mut().zip(&counts) {
        ci.iter_mut().for_each(|v| *v /= n as f64);
    }
    (c, counts)
}

/// `(B/(k−1)) / (W/(n−k))`; 1 when the within-cluster dispersion is 0.
pub fn calinski_harabasz(points: &Matrix, assignment: &[usize]) -> Result<f64> {
    let (a, k) = groups(points, assignment)?;
    let n = points.rows();
    let (c, counts) = centroids(points, &a, k);
    let d = points.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(points.row(i)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let between: f64 = c
        .iter()
        .zip(&counts)
        .map(|(ci, &nk)| nk as f64 * ci.iter().zip(&mean).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    let within: f64 = (0..n)
        .map(|i| {
            points
                .row(i)
                .iter()
                .zip(&c[a[i]])
                .map(|(&x, y)| (x as f64 - y).powi(2))
                .sum::<f64>()
        })
        .sum();
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

/// Mean silhouette with Euclidean distances; members of singleton
/// clusters score 0.
pub fn silhouette(points: &Matrix, assignment: &[usize]) -> Result<f64> {
    let (a, k) = groups(points, assignment)?;
    let n = points.rows();
    let mut counts = vec![0usize; k];
    for &l in &a {
        counts[l] += 1;
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| points.row(i).iter().map(|&v| v as f64).collect())
        .collect();
    let mut total = 0.0;
    let mut sums = vec![0.0f64; k];
    for i in 0..n {
        if counts[a[i]] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                let d2: f64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| (x - y) * (x - y)).sum();
                sums[a[j]] += d2.sqrt();
            }
        }
        let own = sums[a[i]] / (counts[a[i]] - 1) as f64;
        let other = (0..k)
            .filter(|&l| l != a[i])
            .map(|l| sums[l] / counts[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = own.max(other);
        if m > 0.0 {
            total += (other - own) / m;
        }
    }
    Ok(total / n as f64)
}
