//! L2-regularized multinomial logistic regression fitted by L-BFGS.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::evalkit::metrics::compact_labels;
use crate::numerics::{seeded_rng, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Inverse regularization strength: minimizes `c·Σ CE + ½‖W‖²`.
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the largest gradient entry falls below this.
    pub tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 100,
            tol: 1e-4,
            memory: 10,
        }
    }
}

/// Fitted classifier: weights `d×k` and an unpenalized intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub dim: usize,
    /// Original class ids, indexed by internal class.
    pub classes: Vec<usize>,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        let k = self.classes.len();
        let mut scores = vec![0.0; k];
        (0..x.rows())
            .map(|i| {
                scores.copy_from_slice(&self.bias);
                for (a, &v) in x.row(i).iter().enumerate() {
                    if v != 0.0 {
                        let w = &self.weights[a * k..(a + 1) * k];
                        scores.iter_mut().zip(w).for_each(|(s, w)| *s += v as f64 * w);
                    }
                }
                let best = (0..k)
                    .max_by(|&p, &q| scores[p].total_cmp(&scores[q]).then(q.cmp(&p)))
                    .expect("k ≥ 2");
                self.classes[best]
            })
            .collect()
    }
}

struct Problem<'a> {
    x: Vec<&'a [f32]>,
    y: Vec<usize>,
    d: usize,
    k: usize,
    c: f64,
}

impl Problem<'_> {
    /// Objective and gradient at `theta = [W (d×k row-major), b (k)]`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (d, k) = (self.d, self.k);
        let (w, b) = theta.split_at(d * k);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        let mut z = vec![0.0; k];
        for (row, &y) in self.x.iter().zip(&self.y) {
            z.copy_from_slice(b);
            for (a, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    z.iter_mut().zip(&w[a * k..(a + 1) * k]).for_each(|(s, w)| *s += v as f64 * w);
                }
            }
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
            f += lse - z[y];
            // residual softmax − onehot, scaled by c
            for (j, s) in z.iter_mut().enumerate() {
                *s = self.c * ((*s - lse).exp() - if j == y { 1.0 } else { 0.0 });
            }
            let (gw, gb) = grad.split_at_mut(d * k);
            for (a, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    gw[a * k..(a + 1) * k].iter_mut().zip(&z).for_each(|(g, r)| *g += v as f64 * r);
                }
            }
            gb.iter_mut().zip(&z).for_each(|(g, r)| *g += r);
        }
        f *= self.c;
        for (g, &wi) in grad[..d * k].iter_mut().zip(w) {
            *g += wi;
            f += 0.5 * wi * wi;
        }
        f
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` with L-BFGS and a backtracking Armijo line search.
/// Returns the number of iterations taken.
pub fn lbfgs(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    x: &mut [f64],
    memory: usize,
    max_iter: usize,
    tol: f64,
) -> usize {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for iter in 0..max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            return iter;
        }
        // Two-loop recursion.
        dir.copy_from_slice(&g);
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(q, yi)| *q -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.back().map_or_else(
            || 1.0 / dot(&g, &g).sqrt().max(1e-12),
            |(s, y, _)| dot(s, y) / dot(y, y),
        );
        dir.iter_mut().for_each(|q| *q *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(r, si)| *r += (a - b) * si);
        }
        dir.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            hist.clear();
            let scale = 1.0 / dot(&g, &g).sqrt().max(1e-12);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi * scale);
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            x_new.iter_mut().zip(x.iter()).zip(&dir).for_each(|((xn, xi), di)| *xn = xi + step * di);
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-10 {
                    if hist.len() == memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return iter + 1;
        }
    }
    max_iter
}

/// Fits the probe on `train` rows. `init_seed` draws a small random
/// starting point; the objective is strictly convex, so it only nudges
/// where the iteration budget stops.
pub fn fit_logistic(
    x: &Matrix,
    labels: &[usize],
    train: &[usize],
    config: &ProbeConfig,
    init_seed: u64,
) -> Result<LogisticModel> {
    if x.rows() != labels.len() {
        return Err(Error::Dimension {
            op: "fit_logistic",
            left: x.shape(),
            right: (labels.len(), 1),
        });
    }
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let (y, k) = compact_labels(&train_labels);
    if k < 2 {
        return Err(Error::contract(format!(
            "training set has {k} class(es); the probe needs at least 2"
        )));
    }
    let mut classes = vec![0; k];
    for (&yi, &l) in y.iter().zip(&train_labels) {
        classes[yi] = l;
    }
    let d = x.cols();
    let problem = Problem {
        x: train.iter().map(|&i| x.row(i)).collect(),
        y,
        d,
        k,
        c: config.c,
    };
    let mut rng = seeded_rng(init_seed);
    let mut theta: Vec<f64> = (0..d * k)
        .map(|_| 1e-3 * rng.sample::<f64, _>(StandardNormal))
        .chain(std::iter::repeat_n(0.0, k))
        .collect();
    let iterations = lbfgs(|t, g| problem.eval(t, g), &mut theta, config.memory, config.max_iter, config.tol);
    let bias = theta.split_off(d * k);
    Ok(LogisticModel {
        weights: theta,
        bias,
        dim: d,
        classes,
        iterations,
    })
}

/// Accuracy on `test` rows of a probe fitted on `train` rows.
pub fn probe_accuracy(
    x: &Matrix,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    config: &ProbeConfig,
    init_seed: u64,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::contract("empty test set"));
    }
    let model = fit_logistic(x, labels, train, config, init_seed)?;
    let mut rows = Vec::with_capacity(test.len() * x.cols());
    for &i in test {
        rows.extend_from_slice(x.row(i));
    }
    let pred = model.predict(&Matrix::from_vec(test.len(), x.cols(), rows)?);
    let correct = pred.iter().zip(test).filter(|(p, &i)| **p == labels[i]).count();
    Ok(correct as f64 / test.len() as f64)
}
