use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Glorot/Xavier uniform initialization on `(-a, a)`, `a = sqrt(6/(rows+cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::contract(format!(
            "glorot init needs non-zero dimensions, got {rows}x{cols}"
        )));
    }
    let a = (6.0 / (rows + cols) as f64).sqrt() as f32;
    let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
    Matrix::from_vec(rows, cols, data)
}
