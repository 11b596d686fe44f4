//! k-means with greedy k-means++ seeding, Lloyd iterations, and restarts.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on total squared centroid movement, relative
    /// to the mean per-feature variance of the data.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    /// k rows of centroid coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn to_rows(points: &Matrix) -> Vec<Vec<f64>> {
    (0..points.rows())
        .map(|i| points.row(i).iter().map(|&v| v as f64).collect())
        .collect()
}

/// Greedy k-means++: each new center is the best of `2 + ⌊ln k⌋`
/// candidates drawn proportionally to squared distance.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    let mut pot: f64 = closest.iter().sum();
    while centers.len() < k {
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if pot > 0.0 {
                let r = rng.random::<f64>() * pot;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &d) in closest.iter().enumerate() {
                    acc += d;
                    if acc > r {
                        pick = i;
                        break;
                    }
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let d: Vec<f64> = points
                .iter()
                .zip(&closest)
                .map(|(p, &c)| c.min(sq_dist(p, &points[cand])))
                .collect();
            let s: f64 = d.iter().sum();
            if best.as_ref().is_none_or(|b| s < b.0) {
                best = Some((s, cand, d));
            }
        }
        let (s, cand, d) = best.expect("at least one trial");
        centers.push(points[cand].clone());
        closest = d;
        pot = s;
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, a) in points.iter().zip(out.iter_mut()) {
        let (mut bi, mut bd) = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(p, center);
            if d < bd {
                bd = d;
                bi = c;
            }
        }
        *a = bi;
        inertia += bd;
    }
    inertia
}

/// Lloyd iterations from the given centers. Returns the final result and
/// the inertia after every assignment step.
pub fn lloyd(
    points: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (KMeansResult, Vec<f64>) {
    let k = centers.len();
    let d = points.first().map_or(0, |p| p.len());
    let mut assignment = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut inertia = assign(points, &centers, &mut assignment);
    history.push(inertia);
    for _ in 0..max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut new_centers = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centers[assignment[i]])
                            .total_cmp(&sq_dist(&points[j], &centers[assignment[j]]))
                            .then(j.cmp(&i))
                    })
                    .expect("non-empty");
                new_centers.push(points[far].clone());
            } else {
                new_centers.push(sums[c].iter().map(|s| s / counts[c] as f64).collect());
            }
        }
        let shift: f64 = centers.iter().zip(&new_centers).map(|(a, b)| sq_dist(a, b)).sum();
        centers = new_centers;
        inertia = assign(points, &centers, &mut assignment);
        history.push(inertia);
        if shift <= tol {
            break;
        }
    }
    (
        KMeansResult {
            assignment,
            centroids: centers,
            inertia,
            iterations,
        },
        history,
    )
}

/// Best-of-`restarts` k-means; the lowest inertia wins, earliest on ties.
pub fn kmeans_with(points: &Matrix, k: usize, config: &KMeansConfig, rng: &mut Rng) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::contract(format!("k = {k} must be in 1..={n}")));
    }
    let rows = to_rows(points);
    let d = points.cols();
    let mean_var = if d == 0 {
        0.0
    } else {
        (0..d)
            .map(|j| {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
                rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / d as f64
    };
    let tol = config.tol * mean_var;
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts.max(1) {
        let init = kmeans_plus_plus(&rows, k, rng);
        let (r, _) = lloyd(&rows, init, config.max_iter, tol);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans(points: &Matrix, k: usize, rng: &mut Rng) -> Result<KMeansResult> {
    kmeans_with(points, k, &KMeansConfig::default(), rng)
}
