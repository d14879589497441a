//! Desk-scale spectral utilities: dense spectral radius for iteration
//! operators and power-iteration norms for sparse SPD matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::sparse::banded::BandedCholesky;
use crate::sparse::{SparseSpd, DENSE_GATE};

/// Spectral radius of a dense real matrix via its complex eigenvalues.
/// Gated to n ≤ 400: this is a test and diagnostics instrument.
pub fn dense_spectral_radius(g: &DMatrix<f64>) -> Result<f64> {
    if g.nrows() != g.ncols() {
        return Err(Error::contract("spectral radius needs a square matrix"));
    }
    if g.nrows() > DENSE_GATE {
        return Err(Error::ResourceCap(format!(
            "dense spectral radius gated to n <= {DENSE_GATE}, got {}",
            g.nrows()
        )));
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let eig = g.complex_eigenvalues();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if !rho.is_finite() {
        return Err(Error::numeric("eigenvalue computation returned a non-finite value"));
    }
    Ok(rho)
}

/// Largest eigenvalue of a sparse SPD matrix by power iteration with a
/// Rayleigh-quotient estimate, relative tolerance 1e-6.
pub fn spectral_norm(a: &SparseSpd, flops: &mut FlopCounter) -> Result<f64> {
    power_iteration(
        |x, f| a.spmv(x, f),
        a.n(),
        1e-6,
        20_000,
        flops,
    )
}

/// Largest eigenvalue of A⁻¹ (i.e. 1/λ_min(A)) by inverse power iteration
/// through a banded Cholesky factorization.
pub fn inverse_spectral_norm(a: &SparseSpd, flops: &mut FlopCounter) -> Result<f64> {
    let chol = BandedCholesky::new(a, flops)?;
    power_iteration(|x, f| chol.solve(x, f), a.n(), 1e-6, 20_000, flops)
}

fn power_iteration<F>(
    mut apply: F,
    n: usize,
    rel_tol: f64,
    kmax: usize,
    flops: &mut FlopCounter,
) -> Result<f64>
where
    F: FnMut(&[f64], &mut FlopCounter) -> Result<Vec<f64>>,
{
    // deterministic start vector with components in every direction
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761) % 97) as f64 / 97.0).collect();
    normalize(&mut v);
    let mut lambda = 0.0f64;
    for _ in 0..kmax {
        let mut w = apply(&v, flops)?;
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w;
        if (rayleigh - lambda).abs() <= rel_tol * rayleigh.abs().max(f64::MIN_POSITIVE) {
            return Ok(rayleigh);
        }
        lambda = rayleigh;
    }
    Err(Error::numeric(format!(
        "power iteration did not converge within {kmax} iterations (last estimate {lambda})"
    )))
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
