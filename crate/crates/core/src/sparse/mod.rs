//! Sparse symmetric storage and the small set of kernels everything else is
//! built from: matrix-vector products, triangular solves, banded Cholesky, and
//! desk-scale dense spectral utilities.

mod banded;
mod csr;
mod spectral;

pub use banded::{banded_cholesky, BandedCholesky};
pub use csr::{SparseSpd, TriPart, TriangularView};
pub use spectral::{dense_spectral_radius, inverse_spectral_norm, spectral_norm};

/// Dense spectral routines are test/diagnostic instruments, gated to this size.
pub const DENSE_GATE: usize = 400;
