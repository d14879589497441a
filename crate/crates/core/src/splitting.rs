//! The five classical splittings A = M − N and their factored actions.
//!
//! M is never assembled: every action goes through diagonal scalings and
//! triangular sweeps over the CSR rows of A. For SSOR in particular,
//! M = ω/(2−ω)·M_SOR D⁻¹ M_SORᵀ is held as forward sweep, diagonal scale,
//! backward sweep.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::sparse::{SparseSpd, DENSE_GATE};

/// Which classical splitting to build, with its relaxation parameter where
/// one applies. Legal ranges: ω > 0 for Richardson, 0 < ω < 2 for SOR/SSOR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplittingKind {
    Richardson { omega: f64 },
    Jacobi,
    GaussSeidel,
    Sor { omega: f64 },
    Ssor { omega: f64 },
}

impl SplittingKind {
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            SplittingKind::Richardson { .. } | SplittingKind::Jacobi | SplittingKind::Ssor { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SplittingKind::Richardson { omega } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(Error::parameter(format!(
                        "Richardson requires omega > 0, got {omega}"
                    )));
                }
            }
            SplittingKind::Sor { omega } | SplittingKind::Ssor { omega } => {
                if !(omega > 0.0 && omega < 2.0) {
                    return Err(Error::parameter(format!(
                        "SOR/SSOR require 0 < omega < 2, got {omega}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl FromStr for SplittingKind {
    type Err = Error;

    /// Parses the CLI/config forms `gs`, `jacobi`, `richardson:0.1`,
    /// `sor:1.9852`, `ssor:1.6641`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, omega) = match s.split_once(':') {
            Some((n, w)) => {
                let omega: f64 = w
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad relaxation parameter in '{s}'")))?;
                (n, Some(omega))
            }
            None => (s, None),
        };
        let kind = match (name, omega) {
            ("gs" | "gauss-seidel", None) => SplittingKind::GaussSeidel,
            ("jacobi", None) => SplittingKind::Jacobi,
            ("richardson", Some(w)) => SplittingKind::Richardson { omega: w },
            ("sor", Some(w)) => SplittingKind::Sor { omega: w },
            ("ssor", Some(w)) => SplittingKind::Ssor { omega: w },
            _ => return Err(Error::Parse(format!("unknown splitting spec '{s}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for SplittingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplittingKind::Richardson { omega } => write!(f, "richardson:{omega}"),
            SplittingKind::Jacobi => write!(f, "jacobi"),
            SplittingKind::GaussSeidel => write!(f, "gs"),
            SplittingKind::Sor { omega } => write!(f, "sor:{omega}"),
            SplittingKind::Ssor { omega } => write!(f, "ssor:{omega}"),
        }
    }
}

/// A realized splitting of a sparse SPD matrix: M-solves, M/N applies, and the
/// noise sampler for Var(c) = Mᵀ + N.
#[derive(Debug, Clone)]
pub struct Splitting<'a> {
    kind: SplittingKind,
    a: &'a SparseSpd,
    diag: Vec<f64>,
    sqrt_diag: Vec<f64>,
    inv_diag: Vec<f64>,
    /// γ = (2/ω − 1)^{1/2}, the per-sweep SSOR noise scale.
    gamma: f64,
    nnz_lower: u64,
    nnz_upper: u64,
}

impl<'a> Splitting<'a> {
    pub fn new(a: &'a SparseSpd, kind: SplittingKind) -> Result<Self> {
        kind.validate()?;
        let diag = a.diag();
        let sqrt_diag: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
        let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let gamma = match kind {
            SplittingKind::Ssor { omega } | SplittingKind::Sor { omega } => (2.0 / omega - 1.0).sqrt(),
            _ => 1.0,
        };
        let mut nnz_lower = 0u64;
        for i in 0..a.n() {
            for (j, _) in a.row(i) {
                if j < i {
                    nnz_lower += 1;
                }
            }
        }
        Ok(Splitting {
            kind,
            a,
            diag,
            sqrt_diag,
            inv_diag,
            gamma,
            nnz_lower,
            nnz_upper: nnz_lower,
        })
    }

    pub fn kind(&self) -> SplittingKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseSpd {
        self.a
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn is_symmetric(&self) -> bool {
        self.kind.is_symmetric()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.a.n() {
            return Err(Error::contract(format!(
                "vector length {} does not match n = {}",
                x.len(),
                self.a.n()
            )));
        }
        Ok(())
    }

    /// Solves ((1/ω)D + L) u = r by forward substitution.
    pub(crate) fn sor_forward_solve(&self, r: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let mut u = vec![0.0; n];
        for i in 0..n {
            let mut acc = r[i];
            for (j, v) in self.a.row(i) {
                if j >= i {
                    break;
                }
                acc -= v * u[j];
            }
            u[i] = acc * omega / self.diag[i];
        }
        flops.add(2 * (self.nnz_lower + n as u64));
        u
    }

    /// Solves ((1/ω)D + Lᵀ) u = r by backward substitution.
    pub(crate) fn sor_backward_solve(&self, r: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let mut u = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = r[i];
            for (j, v) in self.a.row(i) {
                if j > i {
                    acc -= v * u[j];
                }
            }
            u[i] = acc * omega / self.diag[i];
        }
        flops.add(2 * (self.nnz_upper + n as u64));
        u
    }

    /// y = ((1/ω)D + L) x.
    pub(crate) fn sor_m_apply(&self, x: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i] / omega;
            for (j, v) in self.a.row(i) {
                if j >= i {
                    break;
                }
                acc += v * x[j];
            }
            y[i] = acc;
        }
        flops.add(2 * (self.nnz_lower + n as u64));
        y
    }

    /// y = ((1/ω)D + Lᵀ) x.
    pub(crate) fn sor_mt_apply(&self, x: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i] / omega;
            for (j, v) in self.a.row(i) {
                if j > i {
                    acc += v * x[j];
                }
            }
            y[i] = acc;
        }
        flops.add(2 * (self.nnz_upper + n as u64));
        y
    }

    /// y = N_SOR x = (((1−ω)/ω)D − Lᵀ) x.
    pub(crate) fn sor_n_apply(&self, x: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let c = (1.0 - omega) / omega;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = c * self.diag[i] * x[i];
            for (j, v) in self.a.row(i) {
                if j > i {
                    acc -= v * x[j];
                }
            }
            y[i] = acc;
        }
        flops.add(2 * (self.nnz_upper + n as u64));
        y
    }

    /// y = N_SORᵀ x = (((1−ω)/ω)D − L) x.
    pub(crate) fn sor_nt_apply(&self, x: &[f64], omega: f64, flops: &mut FlopCounter) -> Vec<f64> {
        let n = self.a.n();
        let c = (1.0 - omega) / omega;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = c * self.diag[i] * x[i];
            for (j, v) in self.a.row(i) {
                if j >= i {
                    break;
                }
                acc -= v * x[j];
            }
            y[i] = acc;
        }
        flops.add(2 * (self.nnz_lower + n as u64));
        y
    }

    /// Solves M u = r for the splitting's M.
    pub fn apply_m_inverse(&self, r: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        self.check_dim(r)?;
        let n = self.a.n();
        Ok(match self.kind {
            SplittingKind::Richardson { omega } => {
                flops.add(n as u64);
                r.iter().map(|v| omega * v).collect()
            }
            SplittingKind::Jacobi => {
                flops.add(n as u64);
                r.iter().zip(&self.inv_diag).map(|(v, d)| v * d).collect()
            }
            SplittingKind::GaussSeidel => self.sor_forward_solve(r, 1.0, flops),
            SplittingKind::Sor { omega } => self.sor_forward_solve(r, omega, flops),
            SplittingKind::Ssor { omega } => {
                let mut t = self.sor_forward_solve(r, omega, flops);
                for (ti, d) in t.iter_mut().zip(&self.diag) {
                    *ti *= d;
                }
                let mut u = self.sor_backward_solve(&t, omega, flops);
                let scale = (2.0 - omega) / omega;
                for ui in u.iter_mut() {
                    *ui *= scale;
                }
                flops.add(2 * n as u64);
                u
            }
        })
    }

    /// y = M x (assembled from the factored forms).
    pub fn apply_m(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let n = self.a.n();
        Ok(match self.kind {
            SplittingKind::Richardson { omega } => {
                flops.add(n as u64);
                x.iter().map(|v| v / omega).collect()
            }
            SplittingKind::Jacobi => {
                flops.add(n as u64);
                x.iter().zip(&self.diag).map(|(v, d)| v * d).collect()
            }
            SplittingKind::GaussSeidel => self.sor_m_apply(x, 1.0, flops),
            SplittingKind::Sor { omega } => self.sor_m_apply(x, omega, flops),
            SplittingKind::Ssor { omega } => {
                let mut t = self.sor_mt_apply(x, omega, flops);
                for (ti, d) in t.iter_mut().zip(&self.inv_diag) {
                    *ti *= d;
                }
                let mut y = self.sor_m_apply(&t, omega, flops);
                let scale = omega / (2.0 - omega);
                for yi in y.iter_mut() {
                    *yi *= scale;
                }
                flops.add(2 * n as u64);
                y
            }
        })
    }

    /// y = N x. Triangular kinds use the direct form; SSOR uses N = M − A.
    pub fn apply_n(&self, x: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let n = self.a.n();
        Ok(match self.kind {
            SplittingKind::Richardson { omega } => {
                let ax = self.a.spmv(x, flops)?;
                flops.add(2 * n as u64);
                x.iter().zip(&ax).map(|(v, a)| v / omega - a).collect()
            }
            SplittingKind::Jacobi => {
                // N = D − A = −(L + Lᵀ)
                let mut y = vec![0.0; n];
                let mut nnz = 0u64;
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, v) in self.a.row(i) {
                        if j != i {
                            acc -= v * x[j];
                            nnz += 1;
                        }
                    }
                    y[i] = acc;
                }
                flops.add(2 * nnz);
                y
            }
            SplittingKind::GaussSeidel => {
                // N = −Lᵀ
                let mut y = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, v) in self.a.row(i) {
                        if j > i {
                            acc -= v * x[j];
                        }
                    }
                    y[i] = acc;
                }
                flops.add(2 * self.nnz_upper);
                y
            }
            SplittingKind::Sor { omega } => self.sor_n_apply(x, omega, flops),
            SplittingKind::Ssor { .. } => {
                let mx = self.apply_m(x, flops)?;
                let ax = self.a.spmv(x, flops)?;
                flops.add(n as u64);
                mx.iter().zip(&ax).map(|(m, a)| m - a).collect()
            }
        })
    }

    /// Dense iteration matrix G = M⁻¹N, a desk-scale test instrument.
    pub fn iteration_matrix_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.a.n();
        if n > DENSE_GATE {
            return Err(Error::ResourceCap(format!(
                "dense iteration matrix gated to n <= {DENSE_GATE}"
            )));
        }
        let mut g = DMatrix::zeros(n, n);
        let mut f = FlopCounter::new();
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let nx = self.apply_n(&e, &mut f)?;
            let col = self.apply_m_inverse(&nx, &mut f)?;
            for i in 0..n {
                g[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(g)
    }
}

/// How the noise vector c ~ N(ν, Mᵀ+N) is realized for a splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMethod {
    /// Gauss-Seidel / SOR: Mᵀ+N = ((2−ω)/ω)·D, a diagonal scale of iid normals.
    DiagonalScale,
    /// SSOR: c = m + n with m, n drawn through the factored M_SOR / N_SORᵀ forms.
    TwoFactorSsor,
    /// Richardson / Jacobi: dense Cholesky of (2/ω)I − A or 2D − A, desk scale only.
    DenseCholeskyFallback,
}

/// Dense-fallback noise sampling is gated to this size.
pub const NOISE_FALLBACK_GATE: usize = 2000;

/// A prepared sampler for the noise vector c ~ N(ν, Mᵀ + N).
pub struct NoiseSpec<'a> {
    splitting: &'a Splitting<'a>,
    nu: Option<Vec<f64>>,
    method: NoiseMethod,
    /// Lower Cholesky factor of Mᵀ+N for the dense fallback kinds.
    dense_factor: Option<DMatrix<f64>>,
}

impl<'a> NoiseSpec<'a> {
    /// Prepares noise sampling; for Richardson/Jacobi this factors the dense
    /// covariance eagerly and fails with a noise-covariance error when Mᵀ+N is
    /// not SPD (the sampler would not converge).
    pub fn new(splitting: &'a Splitting<'a>, nu: Option<Vec<f64>>) -> Result<Self> {
        if let Some(nu) = &nu {
            if nu.len() != splitting.n() {
                return Err(Error::contract("noise mean dimension mismatch"));
            }
        }
        let method = match splitting.kind() {
            SplittingKind::GaussSeidel | SplittingKind::Sor { .. } => NoiseMethod::DiagonalScale,
            SplittingKind::Ssor { .. } => NoiseMethod::TwoFactorSsor,
            SplittingKind::Richardson { .. } | SplittingKind::Jacobi => {
                NoiseMethod::DenseCholeskyFallback
            }
        };
        let dense_factor = if method == NoiseMethod::DenseCholeskyFallback {
            let n = splitting.n();
            if n > NOISE_FALLBACK_GATE {
                return Err(Error::ResourceCap(format!(
                    "dense noise-covariance fallback gated to n <= {NOISE_FALLBACK_GATE}, got {n}"
                )));
            }
            let a = splitting.matrix().to_dense();
            let cov = match splitting.kind() {
                SplittingKind::Richardson { omega } => {
                    DMatrix::identity(n, n) * (2.0 / omega) - a
                }
                SplittingKind::Jacobi => {
                    let mut c = -a;
                    for i in 0..n {
                        c[(i, i)] += 2.0 * splitting.diag()[i];
                    }
                    c
                }
                _ => unreachable!(),
            };
            let chol = cov.cholesky().ok_or_else(|| {
                Error::NoiseCovarianceNotSpd(format!(
                    "{} splitting: Mᵀ+N has a non-positive eigenvalue, the sampler diverges",
                    splitting.kind()
                ))
            })?;
            Some(chol.unpack())
        } else {
            None
        };
        Ok(NoiseSpec { splitting, nu, method, dense_factor })
    }

    pub fn method(&self) -> NoiseMethod {
        self.method
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.nu.as_deref()
    }

    /// Draws c = ν + ξ with Var(ξ) = Mᵀ + N.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, flops: &mut FlopCounter) -> Vec<f64> {
        let s = self.splitting;
        let n = s.n();
        let mut c = match (self.method, s.kind()) {
            (NoiseMethod::DiagonalScale, kind) => {
                let omega = match kind {
                    SplittingKind::Sor { omega } => omega,
                    _ => 1.0,
                };
                let scale = ((2.0 - omega) / omega).sqrt();
                flops.add(2 * n as u64);
                (0..n)
                    .map(|i| {
                        let z: f64 = rng.sample(StandardNormal);
                        scale * s.sqrt_diag[i] * z
                    })
                    .collect::<Vec<f64>>()
            }
            (NoiseMethod::TwoFactorSsor, SplittingKind::Ssor { omega }) => {
                let m = ssor_m_factor_draw(s, omega, rng, flops);
                let nv = ssor_n_factor_draw(s, omega, rng, flops);
                flops.add(n as u64);
                m.iter().zip(&nv).map(|(a, b)| a + b).collect()
            }
            (NoiseMethod::DenseCholeskyFallback, _) => {
                let factor = self.dense_factor.as_ref().unwrap();
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut c = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += factor[(i, j)] * z[j];
                    }
                    c[i] = acc;
                }
                flops.add((n * n) as u64);
                c
            }
            _ => unreachable!(),
        };
        if let Some(nu) = &self.nu {
            for (ci, vi) in c.iter_mut().zip(nu) {
                *ci += vi;
            }
            flops.add(n as u64);
        }
        c
    }
}

/// Draws m with Var(m) = M_SSOR = ω/(2−ω)·M_SOR D⁻¹ M_SORᵀ,
/// via m = √(ω/(2−ω))·M_SOR D^{−1/2} z.
pub(crate) fn ssor_m_factor_draw<R: Rng + ?Sized>(
    s: &Splitting<'_>,
    omega: f64,
    rng: &mut R,
    flops: &mut FlopCounter,
) -> Vec<f64> {
    let n = s.n();
    let z: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            z / s.sqrt_diag[i]
        })
        .collect();
    let mut m = s.sor_m_apply(&z, omega, flops);
    let scale = (omega / (2.0 - omega)).sqrt();
    for v in m.iter_mut() {
        *v *= scale;
    }
    flops.add(2 * n as u64);
    m
}

/// Draws n with Var(n) = N_SSOR = ω/(2−ω)·N_SORᵀ D⁻¹ N_SOR,
/// via n = √(ω/(2−ω))·N_SORᵀ D^{−1/2} z.
pub(crate) fn ssor_n_factor_draw<R: Rng + ?Sized>(
    s: &Splitting<'_>,
    omega: f64,
    rng: &mut R,
    flops: &mut FlopCounter,
) -> Vec<f64> {
    let n = s.n();
    let z: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            z / s.sqrt_diag[i]
        })
        .collect();
    let mut nv = s.sor_nt_apply(&z, omega, flops);
    let scale = (omega / (2.0 - omega)).sqrt();
    for v in nv.iter_mut() {
        *v *= scale;
    }
    flops.add(2 * n as u64);
    nv
}
