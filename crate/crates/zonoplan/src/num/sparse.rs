//! Compressed sparse row matrices.
//!
//! Generator and constraint matrices of lifted sets are block-sparse by
//! construction, so all set types store their matrices in this format.
//! Matrices are immutable once built; construction goes through triplet
//! lists or the stacking helpers.

use nalgebra::{DMatrix, DVector};

/// Sparse f64 matrix in CSR layout. Column indices are sorted within
/// each row and duplicate entries are summed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpMat {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SpMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Diagonal matrix from a vector.
    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// 0/1 selection matrix: row `i` picks coordinate `coords[i]`.
    pub fn selection(coords: &[usize], ncols: usize) -> Self {
        let triplets: Vec<(usize, usize, f64)> = coords
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, j, 1.0))
            .collect();
        Self::from_triplets(coords.len(), ncols, &triplets)
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of {nrows}x{ncols}");
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
        Self::from_row_lists(nrows, ncols, rows)
    }

    fn from_row_lists(nrows: usize, ncols: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate the nonzeros of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<(usize, usize, f64)> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `self^T * x` without materializing the transpose.
    pub fn tr_matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows, "tr_matvec dimension mismatch");
        let mut y = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
        y
    }

    pub fn matmul(&self, rhs: &SpMat) -> SpMat {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.nrows);
        let mut acc: Vec<f64> = vec![0.0; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            for (k, v) in self.row(i) {
                for (j, w) in rhs.row(k) {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += v * w;
                }
            }
            let mut row = Vec::with_capacity(touched.len());
            for &j in touched.iter() {
                if acc[j] != 0.0 {
                    row.push((j, acc[j]));
                }
                acc[j] = 0.0;
            }
            touched.clear();
            rows.push(row);
        }
        SpMat::from_row_lists(self.nrows, rhs.ncols, rows)
    }

    pub fn add(&self, rhs: &SpMat) -> SpMat {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut triplets = self.triplets();
        triplets.extend(rhs.triplets());
        SpMat::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Horizontal concatenation `[a | b | ...]`.
    pub fn hstack(blocks: &[&SpMat]) -> SpMat {
        assert!(!blocks.is_empty());
        let nrows = blocks[0].nrows;
        let mut triplets = Vec::new();
        let mut col_off = 0;
        for b in blocks {
            assert_eq!(b.nrows, nrows, "hstack row mismatch");
            for (i, j, v) in b.triplets() {
                triplets.push((i, j + col_off, v));
            }
            col_off += b.ncols;
        }
        SpMat::from_triplets(nrows, col_off, &triplets)
    }

    /// Vertical concatenation.
    pub fn vstack(blocks: &[&SpMat]) -> SpMat {
        assert!(!blocks.is_empty());
        let ncols = blocks[0].ncols;
        let mut triplets = Vec::new();
        let mut row_off = 0;
        for b in blocks {
            assert_eq!(b.ncols, ncols, "vstack col mismatch");
            for (i, j, v) in b.triplets() {
                triplets.push((i + row_off, j, v));
            }
            row_off += b.nrows;
        }
        SpMat::from_triplets(row_off, ncols, &triplets)
    }

    pub fn block_diag(blocks: &[&SpMat]) -> SpMat {
        let mut triplets = Vec::new();
        let (mut row_off, mut col_off) = (0, 0);
        for b in blocks {
            for (i, j, v) in b.triplets() {
                triplets.push((i + row_off, j + col_off, v));
            }
            row_off += b.nrows;
            col_off += b.ncols;
        }
        SpMat::from_triplets(row_off, col_off, &triplets)
    }

    /// Per-row sums of `min(0, a_ij)` and `max(0, a_ij)`; the range of
    /// `A x` over `x` in the unit box is `[neg_i, pos_i]` rowwise.
    pub fn row_ranges_unit_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut neg = DVector::zeros(self.nrows);
        let mut pos = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            for (_, v) in self.row(i) {
                if v < 0.0 {
                    neg[i] += v;
                } else {
                    pos[i] += v;
                }
            }
        }
        (neg, pos)
    }

    /// Per-row sum of absolute values.
    pub fn row_abs_sum(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            for (_, v) in self.row(i) {
                out[i] += v.abs();
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Max absolute difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, rhs: &SpMat) -> f64 {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut d: f64 = 0.0;
        for i in 0..self.nrows {
            let mut a: Vec<(usize, f64)> = self.row(i).collect();
            a.extend(rhs.row(i).map(|(j, v)| (j, -v)));
            a.sort_unstable_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < a.len() {
                let j = a[k].0;
                let mut s = 0.0;
                while k < a.len() && a[k].0 == j {
                    s += a[k].1;
                    k += 1;
                }
                d = d.max(s.abs());
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SpMat {
        SpMat::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -3.0)])
    }

    #[test]
    fn triplet_roundtrip_and_get() {
        let m = small();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), -3.0);
        assert_eq!(m.nnz(), 3);
        let d = m.to_dense();
        assert_eq!(SpMat::from_dense(&d), m);
    }

    #[test]
    fn duplicate_triplets_sum() {
        let m = SpMat::from_triplets(1, 2, &[(0, 1, 1.5), (0, 1, 2.5)]);
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = small();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = m.matvec(&x);
        assert_eq!(y, m.to_dense() * &x);
        let z = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(m.tr_matvec(&z), m.to_dense().transpose() * &z);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = small();
        let b = SpMat::from_triplets(3, 2, &[(0, 0, 2.0), (1, 0, 1.0), (2, 1, -1.0)]);
        let c = a.matmul(&b);
        assert_eq!(c.to_dense(), a.to_dense() * b.to_dense());
    }

    #[test]
    fn stacking() {
        let a = SpMat::identity(2);
        let b = SpMat::zeros(2, 2);
        let h = SpMat::hstack(&[&a, &b]);
        assert_eq!(h.ncols(), 4);
        assert_eq!(h.get(1, 1), 1.0);
        let v = SpMat::vstack(&[&a, &a]);
        assert_eq!(v.nrows(), 4);
        assert_eq!(v.get(3, 1), 1.0);
        let d = SpMat::block_diag(&[&a, &SpMat::identity(3)]);
        assert_eq!((d.nrows(), d.ncols()), (5, 5));
        assert_eq!(d.get(4, 4), 1.0);
        assert_eq!(d.get(4, 1), 0.0);
    }

    #[test]
    fn unit_box_ranges() {
        let m = SpMat::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, -2.0), (0, 2, 0.5)]);
        let (neg, pos) = m.row_ranges_unit_box();
        assert_eq!(neg[0], -2.0);
        assert_eq!(pos[0], 1.5);
        assert_eq!(m.row_abs_sum()[0], 3.5);
    }
}
