//! Sparse matrix-splitting solvers and the matching Gibbs-type samplers for
//! multivariate normal targets, with Chebyshev polynomial acceleration.
//!
//! A splitting `A = M - N` of a sparse symmetric positive definite precision
//! matrix defines both a stationary linear solver `x ← M⁻¹(Nx + b)` and a
//! stochastic iteration `y ← M⁻¹(Ny + c)` that samples `N(A⁻¹ν, A⁻¹)` when the
//! noise is drawn with `Var(c) = Mᵀ + N`. Both iterations share the same error
//! polynomial, so a second-order Chebyshev schedule that accelerates the solver
//! accelerates the sampler too, provided the per-iteration noise covariance is
//! rescaled to `a_k M + b_k N`.
//!
//! The crate provides:
//! - [`sparse`]: CSR storage for symmetric matrices, triangular views and
//!   solves, banded Cholesky, desk-scale spectral utilities;
//! - [`splitting`]: Richardson / Jacobi / Gauss-Seidel / SOR / SSOR splittings
//!   with factored `M`-solves and splitting-specific noise sampling;
//! - [`solver`]: stationary, Chebyshev and (preconditioned) CG solvers, with
//!   Lanczos extreme-eigenvalue estimation and iteration-count prediction;
//! - [`sampler`]: Cholesky reference samplers, component-sweep Gibbs, generic
//!   stationary samplers, the two-sweep SSOR sampler, and the Chebyshev
//!   accelerated SSOR sampler;
//! - [`gmrf`]: the 2-D lattice precision model and a 3-D squared-Helmholtz
//!   prior with a vertical-averaging forward model and posterior assembly;
//! - [`stats`]: mergeable moment tracking, exact moment-propagation oracles,
//!   and error-polynomial evaluation;
//! - [`io`]: Matrix Market, CSV vectors, raw f64 grids, JSON reports.

pub mod error;
pub mod flops;
pub mod gmrf;
pub mod io;
pub mod sampler;
pub mod solver;
pub mod sparse;
pub mod splitting;
pub mod stats;

pub use error::{Error, Result};
pub use flops::FlopCounter;
pub use sparse::SparseSpd;
pub use splitting::{Splitting, SplittingKind};
