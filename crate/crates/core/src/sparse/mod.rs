//! Complex sparse matrices and a multifrontal LU direct solver.

mod dense;
mod lu;
mod ordering;

pub use lu::{factor, factor_with, FactorOptions, FactorStats, Factorization};
pub use ordering::{nested_dissection, Ordering};

use crate::error::{HelmError, Result};
use crate::field::C64;

/// Square matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Build from raw CSR arrays, validating the layout.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        if n == 0 || row_ptr.len() != n + 1 || row_ptr[0] != 0 {
            return Err(HelmError::Contract("bad CSR row offsets".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(HelmError::Contract("CSR arrays have inconsistent lengths".into()));
        }
        for r in 0..n {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(HelmError::Contract("CSR row offsets not monotone".into()));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n) {
                return Err(HelmError::Contract(format!("row {r}: columns not strictly increasing or out of range")));
            }
        }
        Ok(SparseMatrix { n, row_ptr, col_idx, values })
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, C64)> = entries.to_vec();
        if sorted.iter().any(|&(r, c, _)| r >= n || c >= n) {
            return Err(HelmError::Contract("triplet index out of range".into()));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<C64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_csr(n, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut next = row_ptr.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(HelmError::Contract(format!("vector of length {} for n = {}", x.len(), self.n)));
        }
        Ok((0..self.n)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }

    /// True when `A = A^T` entry for entry (no conjugation).
    pub fn is_symmetric(&self) -> bool {
        let t = self.transpose();
        t.row_ptr == self.row_ptr && t.col_idx == self.col_idx && t.values == self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, &[(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(5.0))]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), c(3.0));
        assert_eq!(a.get(1, 1), c(0.0));
        assert!(!a.is_symmetric());
        assert_eq!(a.transpose().get(1, 0), c(3.0));
    }

    #[test]
    fn rejects_malformed_csr() {
        assert!(SparseMatrix::from_csr(2, vec![0, 2, 2], vec![1, 0], vec![c(1.0); 2]).is_err());
        assert!(SparseMatrix::from_csr(2, vec![0, 1], vec![0], vec![c(1.0)]).is_err());
        assert!(SparseMatrix::from_csr(0, vec![0], vec![], vec![]).is_err());
    }

    #[test]
    fn matvec_shape_check() {
        let a = SparseMatrix::identity(3);
        assert!(a.mul_vec(&[c(1.0); 2]).is_err());
        assert_eq!(a.mul_vec(&[c(1.0), c(2.0), c(3.0)]).unwrap()[2], c(3.0));
    }
}
