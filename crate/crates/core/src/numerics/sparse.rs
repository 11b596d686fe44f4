use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Compressed-sparse-row matrix of `f32`.
///
/// Column indices within a row are strictly increasing and explicit zeros
/// are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f32>,
}

impl SparseMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            offsets: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// resulting zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f32)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f32)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= rows || c >= cols {
                return Err(Error::contract(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f32> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if v != 0.0 {
                keep_idx.push(c);
                keep_val.push(v);
                offsets[r + 1] += 1;
            }
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices: keep_idx,
            values: keep_val,
        })
    }

    /// Sparse copy of a dense matrix, skipping exact zeros.
    pub fn from_dense(m: &Matrix) -> Self {
        let mut offsets = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            offsets,
            indices,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        let span = self.offsets[r]..self.offsets[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Counting-sort transpose; column indices of the result stay sorted.
    pub fn transpose(&self) -> SparseMatrix {
        let mut offsets = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            offsets[c + 1] += 1;
        }
        for i in 0..self.cols {
            offsets[i + 1] += offsets[i];
        }
        let mut next = offsets.clone();
        let mut indices = vec![0usize; self.indices.len()];
        let mut values = vec![0f32; self.values.len()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                indices[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            offsets,
            indices,
            values,
        }
    }

    pub fn is_symmetric(&self, tol: f32) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// Sparse-dense product `self · d`, accumulating each output entry in `f64`.
    pub fn spmm(&self, d: &Matrix) -> Result<Matrix> {
        if self.cols != d.rows() {
            return Err(Error::Dimension {
                op: "spmm",
                left: self.shape(),
                right: d.shape(),
            });
        }
        let h = d.cols();
        let mut out = Matrix::zeros(self.rows, h);
        let mut acc = vec![0f64; h];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (c, v) in self.row(r) {
                let v = v as f64;
                for (a, &x) in acc.iter_mut().zip(d.row(c)) {
                    *a += v * x as f64;
                }
            }
            for (o, &a) in out.row_mut(r).iter_mut().zip(&acc) {
                *o = a as f32;
            }
        }
        Ok(out)
    }

    /// `selfᵀ · d`; used for gradients.
    pub fn spmm_transposed(&self, d: &Matrix) -> Result<Matrix> {
        if self.rows != d.rows() {
            return Err(Error::Dimension {
                op: "spmm_transposed",
                left: self.shape(),
                right: d.shape(),
            });
        }
        self.transpose().spmm(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_times_dense_is_zero() {
        let d = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let out = SparseMatrix::empty(4, 3).spmm(&d).unwrap();
        assert_eq!(out, Matrix::zeros(4, 2));
    }

    #[test]
    fn identity_times_dense() {
        let d = Matrix::from_rows(&[[1.0, -2.0], [3.5, 4.0]]);
        assert_eq!(SparseMatrix::identity(2).spmm(&d).unwrap(), d);
    }

    #[test]
    fn duplicates_merge_and_zeros_drop() {
        let s = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)])
            .unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let err = SparseMatrix::identity(3).spmm(&Matrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Dimension { op: "spmm", .. }));
    }

    fn dense_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let s: f64 = (0..a.cols()).map(|k| a.get(i, k) as f64 * b.get(k, j) as f64).sum();
                out.set(i, j, s as f32);
            }
        }
        out
    }

    fn sparse_and_dense(max: usize) -> impl Strategy<Value = (Matrix, Matrix)> {
        (1..=max, 1..=max, 1..=max).prop_flat_map(|(r, k, c)| {
            (
                proptest::collection::vec(
                    prop_oneof![3 => Just(0.0f32), 1 => -4.0f32..4.0],
                    r * k,
                ),
                proptest::collection::vec(-4.0f32..4.0, k * c),
            )
                .prop_map(move |(a, b)| {
                    (
                        Matrix::from_vec(r, k, a).unwrap(),
                        Matrix::from_vec(k, c, b).unwrap(),
                    )
                })
        })
    }

    #[test]
    fn random_5x5_matches_densified() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut trip = Vec::new();
        for r in 0..5 {
            for c in 0..5 {
                if rng.random::<f64>() < 0.3 {
                    trip.push((r, c, rng.random_range(-1.0f32..1.0)));
                }
            }
        }
        let s = SparseMatrix::from_triplets(5, 5, trip).unwrap();
        let d = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .unwrap();
        let got = s.spmm(&d).unwrap();
        assert!(got.max_abs_diff(&dense_oracle(&s.to_dense(), &d)) <= 1e-6);
    }

    proptest! {
        #[test]
        fn spmm_matches_dense((a, b) in sparse_and_dense(32)) {
            let s = SparseMatrix::from_dense(&a);
            let got = s.spmm(&b).unwrap();
            prop_assert!(got.max_abs_diff(&dense_oracle(&a, &b)) <= 1e-6);
        }

        #[test]
        fn transposed_spmm_matches_dense((a, b) in sparse_and_dense(16)) {
            let s = SparseMatrix::from_dense(&a);
            let g = Matrix::from_vec(a.rows(), b.cols(), b.data().iter().cycle().take(a.rows() * b.cols()).copied().collect()).unwrap();
            let got = s.spmm_transposed(&g).unwrap();
            prop_assert!(got.max_abs_diff(&dense_oracle(&a.transpose(), &g)) <= 1e-5);
            prop_assert_eq!(s.transpose().to_dense(), a.transpose());
        }
    }
}
