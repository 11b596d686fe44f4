//! Builds a small two-layer expression on the tape, runs the reverse sweep,
//! and compares every gradient entry with central differences.
//!
//! cargo run --release --example autodiff

use std::sync::Arc;

use mvmift::graphdata::normalize;
use mvmift::numerics::{glorot_uniform, seeded_rng, Tape};
use mvmift::{Matrix, Result};

/// `mean(log σ(rowdot(PReLU(Â·X·W), PReLU(Â·X·W)·V)))` for fixed X, Â.
fn forward(x: &Matrix, adj: &Arc<mvmift::SparseMatrix>, w: &Matrix, v: &Matrix) -> Result<(Tape, [mvmift::numerics::Var; 3])> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(w.clone());
    let vv = tape.param(v.clone());
    let slope = tape.constant(Matrix::scalar(0.25));
    let h = tape.matmul(xv, wv)?;
    let h = tape.spmm(adj, h)?;
    let z = tape.prelu(h, slope)?;
    let zv = tape.matmul(z, vv)?;
    let d = tape.row_dot(z, zv)?;
    let l = tape.log_sigmoid(d);
    let loss = tape.mean(l);
    Ok((tape, [wv, vv, loss]))
}

fn main() -> Result<()> {
    let mut rng = seeded_rng(1);
    let x = glorot_uniform(5, 3, &mut rng)?;
    let adj = Arc::new(normalize(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5)?.into_matrix());
    let w = glorot_uniform(3, 4, &mut rng)?;
    let v = glorot_uniform(4, 4, &mut rng)?;

    let (tape, [wv, vv, loss]) = forward(&x, &adj, &w, &v)?;
    let grads = tape.backward(loss)?;
    println!("loss {:.6}, {} tape nodes", tape.value(loss).item(), tape.len());

    let eval = |w: &Matrix, v: &Matrix| -> Result<f64> {
        let (t, [_, _, l]) = forward(&x, &adj, w, v)?;
        Ok(t.value(l).item() as f64)
    };
    let step = 1e-3f32;
    let mut worst = 0.0f64;
    for (name, var, which) in [("W", wv, 0), ("V", vv, 1)] {
        let g = grads.get(var).expect("parameter gradient");
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                let (mut wp, mut vp) = (w.clone(), v.clone());
                let (mut wm, mut vm) = (w.clone(), v.clone());
                let (p, m) = if which == 0 { (&mut wp, &mut wm) } else { (&mut vp, &mut vm) };
                p.set(r, c, p.get(r, c) + step);
                m.set(r, c, m.get(r, c) - step);
                let fd = (eval(&wp, &vp)? - eval(&wm, &vm)?) / (2.0 * step as f64);
                let rel = (g.get(r, c) as f64 - fd).abs() / fd.abs().max(1e-3);
                worst = worst.max(rel);
            }
        }
        println!("d loss / d {name}: {}×{} entries checked", g.rows(), g.cols());
    }
    println!("worst relative error against central differences: {worst:.2e}");
    Ok(())
}
