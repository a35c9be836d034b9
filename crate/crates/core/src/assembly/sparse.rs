use serde::Serialize;

use crate::error::{Error, Result};
use crate::trimming::TrimConfiguration;

/// Row-compressed square matrix over the retained degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Flat tensor index of each row / column.
    dofs: Vec<usize>,
    symmetrized: bool,
}

impl SparseMatrix {
    /// Zero matrix on the overlap graph of the retained functions: `(i, j)`
    /// is stored when the supports of `B_i` and `B_j` overlap.
    pub fn pattern(config: &TrimConfiguration) -> Self {
        let basis = config.basis();
        let n2 = basis.shape().1;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for &i in config.dofs() {
            let (i1, i2) = basis.unflat(i);
            for j1 in basis.dirs[0].overlapping(i1) {
                for j2 in basis.dirs[1].overlapping(i2) {
                    if let Some(d) = config.dof_of(j1 * n2 + j2) {
                        cols.push(d);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        SparseMatrix { row_ptr, cols, vals, dofs: config.dofs().to_vec(), symmetrized: false }
    }

    /// Builds a matrix from raw CSR arrays; column indices must be sorted
    /// within each row.
    pub fn from_csr(row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>, dofs: Vec<usize>) -> Result<Self> {
        let n = dofs.len();
        if row_ptr.len() != n + 1 || cols.len() != vals.len() || row_ptr[n] != cols.len() {
            return Err(Error::Dimension("inconsistent CSR arrays".into()));
        }
        for r in 0..n {
            let c = &cols[row_ptr[r]..row_ptr[r + 1]];
            if c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|&j| j >= n) {
                return Err(Error::Dimension(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        Ok(SparseMatrix { row_ptr, cols, vals, dofs, symmetrized: false })
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let rg = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[rg.clone()], &self.vals[rg])
    }

    /// Mutable value slices of all rows, for independent row formation.
    pub(crate) fn rows_mut(&mut self) -> Vec<(usize, &[usize], &mut [f64])> {
        let mut out = Vec::with_capacity(self.dim());
        let mut rest = self.vals.as_mut_slice();
        for r in 0..self.dofs.len() {
            let len = self.row_ptr[r + 1] - self.row_ptr[r];
            let (head, tail) = rest.split_at_mut(len);
            out.push((r, &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]], head));
            rest = tail;
        }
        out
    }

    /// Position of `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.vals[k])
    }

    pub(crate) fn add_at(&mut self, k: usize, v: f64) {
        self.vals[k] += v;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    /// Largest `|r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim())
            .flat_map(|r| self.row(r).0.iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.row_ptr == other.row_ptr && self.cols == other.cols && self.dofs == other.dofs
    }

    /// Frobenius norm of `self - other`; both must share the pattern.
    pub fn deviation(&self, other: &SparseMatrix) -> Result<f64> {
        self.deviation_rows(other, |_| true)
    }

    /// Frobenius norm of `self - other` over the rows selected by `keep`.
    pub fn deviation_rows(&self, other: &SparseMatrix, keep: impl Fn(usize) -> bool) -> Result<f64> {
        if !self.same_pattern(other) {
            return Err(Error::Dimension("matrices have different sparsity patterns".into()));
        }
        let mut s = 0.0;
        for r in (0..self.dim()).filter(|&r| keep(r)) {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let d = self.vals[k] - other.vals[k];
                s += d * d;
            }
        }
        Ok(s.sqrt())
    }

    /// `max |m_rc - m_cr|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.dim()).all(|r| self.row(r).0.iter().all(|&c| self.position(c, r).is_some()))
    }

    /// Replaces the matrix by `(M + M^T) / 2`. The pattern must be
    /// structurally symmetric.
    pub fn symmetrize(&mut self) {
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if c > r {
                    let t = self.position(c, r).expect("structurally symmetric pattern");
                    let avg = 0.5 * (self.vals[k] + self.vals[t]);
                    self.vals[k] = avg;
                    self.vals[t] = avg;
                }
            }
        }
        self.symmetrized = true;
    }
}
