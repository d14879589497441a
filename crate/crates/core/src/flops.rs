//! Deterministic analytic flop accounting.
//!
//! Counts follow a fixed cost model rather than hardware counters, so that
//! benchmark x-axes are reproducible: 2·nnz per sparse matrix-vector product,
//! 2·nnz(triangle) per triangular solve or apply, n per diagonal scaling,
//! 2n per vector axpy/dot, b²·n per banded Cholesky factorization (constant 1)
//! and n³/3 for a dense one.

/// A per-chain flop accumulator. Never shared between chains; merge totals at
/// the end with [`FlopCounter::merge`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter(u64);

impl FlopCounter {
    pub fn new() -> Self {
        FlopCounter(0)
    }

    #[inline]
    pub fn add(&mut self, flops: u64) {
        self.0 += flops;
    }

    pub fn total(&self) -> u64 {
        self.0
    }

    pub fn merge(&mut self, other: FlopCounter) {
        self.0 += other.0;
    }
}
