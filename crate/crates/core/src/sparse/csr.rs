//! Compressed sparse row storage for symmetric positive definite matrices.
//!
//! The full symmetric pattern is stored (both triangles), so triangular views
//! and transpose applies reduce to index-range filters over the same arrays.

use crate::error::{Error, Result};
use crate::flops::FlopCounter;

/// A sparse symmetric positive definite matrix in CSR form.
///
/// Invariants enforced at construction: the pattern is structurally symmetric
/// with `a_ij == a_ji` exactly as stored, every diagonal entry is present and
/// strictly positive, and column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    /// Builds from (row, col, value) triplets carrying the full symmetric
    /// pattern. Duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("matrix dimension must be positive"));
        }
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::contract(format!(
                    "triplet index ({i},{j}) out of range for n = {n}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            let p = next[i];
            cols[p] = j;
            vals[p] = v;
            next[i] += 1;
        }
        // sort each row, merge duplicates, drop explicit zeros off the diagonal
        let mut row_offsets = vec![0usize; n + 1];
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        for i in 0..n {
            let lo = counts[i];
            let hi = counts[i + 1];
            let mut row: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                if v != 0.0 || c == i {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            row_offsets[i + 1] = out_cols.len();
        }
        let m = SparseSpd { n, row_offsets, col_indices: out_cols, values: out_vals };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let mut has_diag = false;
            for (j, v) in self.row(i) {
                if j == i {
                    has_diag = true;
                    if v <= 0.0 {
                        return Err(Error::contract(format!(
                            "diagonal entry a[{i},{i}] = {v} is not strictly positive"
                        )));
                    }
                } else {
                    match self.get(j, i) {
                        Some(w) if w == v => {}
                        _ => {
                            return Err(Error::contract(format!(
                                "pattern/value asymmetry at ({i},{j})"
                            )))
                        }
                    }
                }
            }
            if !has_diag {
                return Err(Error::contract(format!("missing diagonal entry in row {i}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entry lookup by binary search within the row.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|p| self.values[lo + p])
    }

    /// Iterates the stored (column, value) pairs of row `i` in column order.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).unwrap()).collect()
    }

    /// Half bandwidth: max over stored entries of |i − j|.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0usize;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                b = b.max(i.abs_diff(j));
            }
        }
        b
    }

    /// y = A x. Cost model: 2·nnz flops.
    pub fn spmv(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y, flops)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64], flops: &mut FlopCounter) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::contract(format!(
                "spmv dimension mismatch: n = {}, x = {}, y = {}",
                self.n,
                x.len(),
                y.len()
            )));
        }
        for i in 0..self.n {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut acc = 0.0;
            for p in lo..hi {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            y[i] = acc;
        }
        flops.add(2 * self.nnz() as u64);
        Ok(())
    }

    pub fn view(&self, part: TriPart) -> TriangularView<'_> {
        TriangularView { base: self, part }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Access to the raw CSR arrays (offsets, columns, values).
    pub fn csr_parts(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_offsets, &self.col_indices, &self.values)
    }
}

/// Which triangle of the base matrix a view selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriPart {
    StrictLower,
    Diagonal,
    StrictUpper,
    LowerWithDiag,
    UpperWithDiag,
}

impl TriPart {
    #[inline]
    fn keeps(self, i: usize, j: usize) -> bool {
        match self {
            TriPart::StrictLower => j < i,
            TriPart::Diagonal => j == i,
            TriPart::StrictUpper => j > i,
            TriPart::LowerWithDiag => j <= i,
            TriPart::UpperWithDiag => j >= i,
        }
    }

    fn has_diag(self) -> bool {
        matches!(self, TriPart::Diagonal | TriPart::LowerWithDiag | TriPart::UpperWithDiag)
    }
}

/// A triangular (or diagonal) slice of a [`SparseSpd`], used for splitting
/// actions and substitution solves without copying the matrix.
#[derive(Debug, Clone, Copy)]
pub struct TriangularView<'a> {
    base: &'a SparseSpd,
    part: TriPart,
}

impl<'a> TriangularView<'a> {
    pub fn part(&self) -> TriPart {
        self.part
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    fn part_nnz(&self) -> u64 {
        let mut nnz = 0u64;
        for i in 0..self.base.n {
            for (j, _) in self.base.row(i) {
                if self.part.keeps(i, j) {
                    nnz += 1;
                }
            }
        }
        nnz
    }

    /// y = T x where T is the selected triangle. Cost model: 2·nnz(T).
    pub fn spmv(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if x.len() != self.base.n {
            return Err(Error::contract("triangular spmv dimension mismatch"));
        }
        let mut y = vec![0.0; self.base.n];
        let mut nnz = 0u64;
        for i in 0..self.base.n {
            let mut acc = 0.0;
            for (j, v) in self.base.row(i) {
                if self.part.keeps(i, j) {
                    acc += v * x[j];
                    nnz += 1;
                }
            }
            y[i] = acc;
        }
        flops.add(2 * nnz);
        Ok(y)
    }

    /// Solves T u = r by forward or backward substitution. The view must
    /// include the diagonal. Cost model: 2·nnz(T).
    pub fn tri_solve(&self, r: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if !self.part.has_diag() {
            return Err(Error::contract("tri_solve requires a view that includes the diagonal"));
        }
        if r.len() != self.base.n {
            return Err(Error::contract("tri_solve dimension mismatch"));
        }
        let n = self.base.n;
        let mut u = vec![0.0; n];
        let lower = matches!(self.part, TriPart::LowerWithDiag | TriPart::Diagonal);
        let order: Box<dyn Iterator<Item = usize>> =
            if lower { Box::new(0..n) } else { Box::new((0..n).rev()) };
        for i in order {
            let mut acc = r[i];
            let mut diag = 0.0;
            for (j, v) in self.base.row(i) {
                if !self.part.keeps(i, j) {
                    continue;
                }
                if j == i {
                    diag = v;
                } else {
                    acc -= v * u[j];
                }
            }
            if diag == 0.0 {
                return Err(Error::SingularTriangular(i));
            }
            u[i] = acc / diag;
        }
        flops.add(2 * self.part_nnz());
        Ok(u)
    }
}
