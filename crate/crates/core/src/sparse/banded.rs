//! Banded Cholesky factorization A = B Bᵀ.
//!
//! The factor is stored by rows inside the band: row `i` holds the entries for
//! columns `i-b ..= i`. Factorization cost is counted as b²·n flops (constant 1
//! for the O(b²n) model), each solve as 2·(b+1)·n.

use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::sparse::SparseSpd;

/// Default memory cap for band storage (bytes).
pub const DEFAULT_BAND_CAP_BYTES: usize = 2 << 30;

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    // row-major band: factor[i * (b+1) + (j - i + b)] = B[i, j] for i-b <= j <= i
    factor: Vec<f64>,
}

impl BandedCholesky {
    /// Factors an SPD matrix within its band, with the default memory cap.
    pub fn new(a: &SparseSpd, flops: &mut FlopCounter) -> Result<Self> {
        Self::with_cap(a, DEFAULT_BAND_CAP_BYTES, flops)
    }

    pub fn with_cap(a: &SparseSpd, cap_bytes: usize, flops: &mut FlopCounter) -> Result<Self> {
        let n = a.n();
        let b = a.bandwidth();
        let width = b + 1;
        let bytes = n
            .checked_mul(width)
            .and_then(|x| x.checked_mul(std::mem::size_of::<f64>()))
            .ok_or_else(|| Error::ResourceCap("band storage size overflows usize".into()))?;
        if bytes > cap_bytes {
            return Err(Error::ResourceCap(format!(
                "banded Cholesky needs {bytes} bytes of band storage (n = {n}, bandwidth = {b}), cap is {cap_bytes}"
            )));
        }
        let mut band = vec![0.0; n * width];
        let at = |i: usize, j: usize| i * width + (j + b - i);
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[at(i, j)] = v;
                }
            }
        }
        // in-place left-looking factorization within the band
        for j in 0..n {
            let start = j.saturating_sub(b);
            for k in start..j {
                let ljk = band[at(j, k)];
                if ljk == 0.0 {
                    continue;
                }
                // subtract ljk * column k from column j, rows j..min(n, k+b+1)
                let row_end = (k + b + 1).min(n);
                for i in j..row_end {
                    let lik = band[at(i, k)];
                    if lik != 0.0 {
                        band[at(i, j)] -= lik * ljk;
                    }
                }
            }
            let pivot = band[at(j, j)];
            if pivot <= 0.0 {
                return Err(Error::NotPositiveDefinite(j));
            }
            let d = pivot.sqrt();
            band[at(j, j)] = d;
            let row_end = (j + b + 1).min(n);
            for i in (j + 1)..row_end {
                band[at(i, j)] /= d;
            }
        }
        flops.add((b as u64) * (b as u64) * (n as u64));
        Ok(BandedCholesky { n, bandwidth: b, factor: band })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.factor[i * (self.bandwidth + 1) + (j + self.bandwidth - i)]
    }

    /// Solves B u = r (forward substitution).
    pub fn solve_lower(&self, r: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::contract("banded solve dimension mismatch"));
        }
        let b = self.bandwidth;
        let mut u = r.to_vec();
        for i in 0..self.n {
            let start = i.saturating_sub(b);
            let mut acc = u[i];
            for j in start..i {
                acc -= self.entry(i, j) * u[j];
            }
            u[i] = acc / self.entry(i, i);
        }
        flops.add(2 * (b as u64 + 1) * self.n as u64);
        Ok(u)
    }

    /// Solves Bᵀ u = r (back substitution).
    pub fn solve_upper_transposed(&self, r: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::contract("banded solve dimension mismatch"));
        }
        let b = self.bandwidth;
        let mut u = r.to_vec();
        for i in (0..self.n).rev() {
            // Bᵀ[i, j] = B[j, i] for j in i..=i+b
            let end = (i + b + 1).min(self.n);
            let mut acc = u[i];
            for j in (i + 1)..end {
                acc -= self.entry(j, i) * u[j];
            }
            u[i] = acc / self.entry(i, i);
        }
        flops.add(2 * (b as u64 + 1) * self.n as u64);
        Ok(u)
    }

    /// Solves A x = r via the two substitutions.
    pub fn solve(&self, r: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        let t = self.solve_lower(r, flops)?;
        self.solve_upper_transposed(&t, flops)
    }

    /// y = B x; used by covariance-side sampling and reconstruction tests.
    pub fn apply_lower(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::contract("banded apply dimension mismatch"));
        }
        let b = self.bandwidth;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let start = i.saturating_sub(b);
            let mut acc = 0.0;
            for j in start..=i {
                acc += self.entry(i, j) * x[j];
            }
            y[i] = acc;
        }
        flops.add(2 * (b as u64 + 1) * self.n as u64);
        Ok(y)
    }
}

/// Convenience wrapper matching the operation naming of the crate surface.
pub fn banded_cholesky(a: &SparseSpd, flops: &mut FlopCounter) -> Result<BandedCholesky> {
    BandedCholesky::new(a, flops)
}
