//! Symmetric sparse and dense matrix storage.
//!
//! [`SymSparseMatrix`] keeps both triangles in CSR form so rows can be walked
//! directly, but it is only ever constructed from one value per unordered
//! index pair, so symmetry holds by construction. Every diagonal entry is
//! stored, even when its value is zero.

mod dense;
mod mmio;

pub use dense::DenseMatrix;
pub use mmio::{
    load_matrix_market, read_matrix_market, save_matrix_market, write_matrix_market,
    MatrixMarketError,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("entry ({row}, {col}) is out of range for a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("entry ({row}, {col}) is given more than once")]
    DuplicateEntry { row: usize, col: usize },
    #[error("threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("matrix value at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("values at ({row}, {col}) and ({col}, {row}) differ")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Real symmetric sparse matrix with a fully stored diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparseMatrix {
    /// Builds a matrix from one value per unordered index pair.
    ///
    /// Pairs may be given in either orientation; `(i, j)` and `(j, i)` both
    /// present is a duplicate. Missing diagonal entries are inserted as
    /// explicit zeros.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self, MatrixError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(MatrixError::IndexOutOfRange { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(MatrixError::NonFinite { row: i, col: j });
            }
            upper.push((i.min(j), i.max(j), v));
        }
        upper.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = upper
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(MatrixError::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }
        let mut has_diag = vec![false; n];
        for &(i, j, _) in &upper {
            if i == j {
                has_diag[i] = true;
            }
        }
        upper.extend((0..n).filter(|&i| !has_diag[i]).map(|i| (i, i, 0.0)));
        Ok(Self::from_sorted_upper_unchecked(n, upper))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Upper-triangle entries, validated and deduplicated by the caller.
    pub(crate) fn from_sorted_upper_unchecked(
        n: usize,
        mut upper: Vec<(usize, usize, f64)>,
    ) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j, _) in &upper {
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut next = row_ptr[..n].to_vec();
        // Mirror entries first so every row ends up in ascending column order:
        // for row r, lower entries (j < r) come from pairs (j, r) sorted by j.
        upper.sort_unstable_by_key(|&(i, j, _)| (j, i));
        for &(i, j, v) in &upper {
            if i != j {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        upper.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for &(i, j, v) in &upper {
            col_idx[next[i]] = j;
            values[next[i]] = v;
            next[i] += 1;
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Rows given as full (both-triangle) sorted column lists. The caller
    /// guarantees exact symmetry and a stored diagonal.
    pub(crate) fn from_full_rows_unchecked(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let m = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        debug_assert!(m.is_exactly_symmetric());
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries with `i <= j`.
    pub fn nnz(&self) -> usize {
        (self.col_idx.len() + self.n) / 2
    }

    /// Column indices and values of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    /// Stored value at `(i, j)`, or `None` when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Value at `(i, j)` with unstored entries reading as zero.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(0.0)
    }

    pub fn is_stored(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    /// Stored entries with `i <= j`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row_iter(i)
                .filter(move |&(j, _)| j >= i)
                .map(move |(j, v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.value(i, i)).sum()
    }

    /// Frobenius norm over both triangles.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Drops every off-diagonal entry with `|value| < tau`.
    pub fn threshold(&self, tau: f64) -> Result<Self, MatrixError> {
        self.threshold_with_dropped(tau).map(|(m, _)| m)
    }

    /// Like [`threshold`](Self::threshold), also returning the dropped
    /// index pairs `(i, j)` with `i < j`.
    pub fn threshold_with_dropped(
        &self,
        tau: f64,
    ) -> Result<(Self, Vec<(usize, usize)>), MatrixError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(MatrixError::InvalidThreshold(tau));
        }
        let mut dropped = Vec::new();
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut row = Vec::new();
            for (j, v) in self.row_iter(i) {
                if i == j || v.abs() >= tau {
                    row.push((j, v));
                } else if i < j {
                    dropped.push((i, j));
                }
            }
            rows.push(row);
        }
        Ok((Self::from_full_rows_unchecked(self.n, rows), dropped))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row_iter(i) {
                d.set(i, j, v);
            }
        }
        d
    }

    /// Keeps the diagonal and every nonzero off-diagonal element of `d`.
    /// Fails unless `d` is exactly symmetric.
    pub fn from_dense(d: &DenseMatrix) -> Result<Self, MatrixError> {
        let n = d.n();
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = d.get(i, j);
                if !v.is_finite() {
                    return Err(MatrixError::NonFinite { row: i, col: j });
                }
                if v != d.get(j, i) {
                    return Err(MatrixError::NotSymmetric { row: i, col: j });
                }
                if i == j || v != 0.0 {
                    upper.push((i, j, v));
                }
            }
        }
        Ok(Self::from_sorted_upper_unchecked(n, upper))
    }

    /// Sparse product `self * self` by row-wise accumulation.
    ///
    /// Each output element sums its products in ascending order of the inner
    /// index, which keeps the result bitwise symmetric. The output pattern is
    /// structural: entries that cancel to zero stay stored.
    pub fn square(&self) -> Self {
        let n = self.n;
        let mut acc = vec![0.0f64; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            touched.clear();
            for (k, a_ik) in self.row_iter(i) {
                for (j, a_kj) in self.row_iter(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a_ik * a_kj;
                }
            }
            touched.sort_unstable();
            rows.push(touched.iter().map(|&j| (j, acc[j])).collect());
        }
        Self::from_full_rows_unchecked(n, rows)
    }

    /// Entrywise `alpha * self + beta * other` over the union of patterns.
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &Self,
        beta: f64,
    ) -> Result<Self, MatrixError> {
        if other.n != self.n {
            return Err(MatrixError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            let mut row = Vec::with_capacity(ac.len().max(bc.len()));
            while p < ac.len() || q < bc.len() {
                let ja = ac.get(p).copied().unwrap_or(usize::MAX);
                let jb = bc.get(q).copied().unwrap_or(usize::MAX);
                if ja == jb {
                    row.push((ja, alpha * av[p] + beta * bv[q]));
                    p += 1;
                    q += 1;
                } else if ja < jb {
                    row.push((ja, alpha * av[p]));
                    p += 1;
                } else {
                    row.push((jb, beta * bv[q]));
                    q += 1;
                }
            }
            rows.push(row);
        }
        Ok(Self::from_full_rows_unchecked(self.n, rows))
    }

    /// Maximum absolute entrywise difference, unstored entries reading as zero.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, MatrixError> {
        Ok(self
            .linear_combination(1.0, other, -1.0)?
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    fn is_exactly_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row_iter(i)
                .all(|(j, v)| self.get(j, i).is_some_and(|w| w.to_bits() == v.to_bits()))
        }) && (0..self.n).all(|i| self.get(i, i).is_some())
    }
}
