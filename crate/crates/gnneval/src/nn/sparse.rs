//! Weighted sparse matrices in CSR form, used for graph aggregation.
//!
//! A [`SparseMatrix`] is immutable after construction and multiplies a dense
//! matrix from the left (`A · X`). Construction sorts each row's columns, so
//! products accumulate in a fixed order regardless of input edge order.

use super::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicate coordinates are
    /// rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for w in triplets.windows(2) {
            assert!(
                (w[0].0, w[0].1) != (w[1].0, w[1].1),
                "duplicate entry at ({}, {})",
                w[0].0,
                w[0].1
            );
        }
        let mut offsets = vec![0usize; rows + 1];
        for &(r, c, _) in &triplets {
            assert!((r as usize) < rows && (c as usize) < cols);
            offsets[r as usize + 1] += 1;
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        let col_idx = triplets.iter().map(|t| t.1).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        SparseMatrix {
            rows,
            cols,
            offsets,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// `self · x` (sparse · dense).
    pub fn matmul(&self, x: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, x.rows(), "spmm {}x{} · {:?}", self.rows, self.cols, x.shape());
        let mut out = Tensor2::zeros(self.rows, x.cols());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let x_row = x.row(c as usize);
                for (o, &xv) in out_row.iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((c, r as u32, v));
            }
        }
        SparseMatrix::from_triplets(self.cols, self.rows, triplets)
    }

    /// Entry at (r, c), zero when absent. Intended for tests and small
    /// comparisons, not inner loops.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(i) => vals[i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(r, c as usize, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmm_matches_dense_product() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, 2.0), (1, 0, 2.0), (1, 2, -1.0), (2, 2, 0.5)],
        );
        let x = Tensor2::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(a.matmul(&x).close_to(&a.to_dense().matmul(&x), 1e-15));
    }

    #[test]
    fn transpose_roundtrip() {
        let a = SparseMatrix::from_triplets(2, 4, vec![(0, 3, 1.0), (1, 0, -2.0), (1, 3, 4.0)]);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(3, 1), 4.0);
    }

    #[test]
    #[should_panic(expected = "duplicate entry")]
    fn duplicate_coordinates_rejected() {
        SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0)]);
    }
}
