//! Moment tracking across chains, exact moment-propagation oracles, and
//! error-polynomial evaluation.
//!
//! The oracles propagate the mean and covariance of the stochastic iterations
//! *deterministically* (dense, desk scale), so sampler tests can compare
//! Monte Carlo output against exact moments instead of against other noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::solver::{ChebyState, EigEstimate};
use crate::sampler::cheby_noise_coeffs_next;
use crate::splitting::Splitting;

/// Covariance tracking is gated to this dimension.
pub const TRACKER_GATE: usize = 2000;
/// Exact dense oracles are gated to this dimension.
pub const ORACLE_GATE: usize = 200;

/// One-pass running mean and covariance of vector draws, mergeable across
/// independently accumulated trackers.
#[derive(Debug, Clone)]
pub struct MomentTracker {
    n: usize,
    count: u64,
    mean: Vec<f64>,
    /// Upper-triangle packed sum of outer products of deviations.
    m2: Vec<f64>,
}

impl MomentTracker {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("tracker dimension must be positive"));
        }
        if n > TRACKER_GATE {
            return Err(Error::ResourceCap(format!(
                "moment tracking gated to n <= {TRACKER_GATE}, got {n}"
            )));
        }
        Ok(MomentTracker { n, count: 0, mean: vec![0.0; n], m2: vec![0.0; n * (n + 1) / 2] })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Numerically stable one-pass update.
    pub fn update(&mut self, draw: &[f64]) -> Result<()> {
        if draw.len() != self.n {
            return Err(Error::contract("tracker dimension mismatch"));
        }
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        // delta before the mean moves, delta2 after
        let mut delta = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let d = draw[i] - self.mean[i];
            self.mean[i] += d * inv;
            delta.push(d);
        }
        let mut p = 0usize;
        for i in 0..self.n {
            let d2i = draw[i] - self.mean[i];
            for j in i..self.n {
                self.m2[p] += delta[j] * d2i;
                p += 1;
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample covariance with denominator count − 1.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::contract("need at least two draws for a covariance"));
        }
        let denom = (self.count - 1) as f64;
        let mut cov = DMatrix::zeros(self.n, self.n);
        let mut p = 0usize;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.m2[p] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
                p += 1;
            }
        }
        Ok(cov)
    }

    /// Pairwise merge of two independently accumulated trackers.
    pub fn merge(mut self, other: &MomentTracker) -> Result<MomentTracker> {
        if other.n != self.n {
            return Err(Error::contract("tracker dimension mismatch in merge"));
        }
        if other.count == 0 {
            return Ok(self);
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let nab = na + nb;
        let delta: Vec<f64> =
            (0..self.n).map(|i| other.mean[i] - self.mean[i]).collect();
        let w = na * nb / nab;
        let mut p = 0usize;
        for i in 0..self.n {
            for j in i..self.n {
                self.m2[p] += other.m2[p] + w * delta[i] * delta[j];
                p += 1;
            }
        }
        for i in 0..self.n {
            self.mean[i] += delta[i] * (nb / nab);
        }
        self.count += other.count;
        Ok(self)
    }
}

/// Operation-style alias: updates the tracker with one draw.
pub fn update_moments(tracker: &mut MomentTracker, draw: &[f64]) -> Result<()> {
    tracker.update(draw)
}

/// Largest |eigenvalue| of a dense symmetric matrix by power iteration
/// (applied twice per step so the iteration converges on the square).
fn sym_abs_norm(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_iterator(n, (0..n).map(|i| 1.0 + ((i * 37 % 11) as f64) * 0.1));
    v /= v.norm();
    let mut est = 0.0f64;
    for _ in 0..5000 {
        let w = b * (b * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let new_est = norm.sqrt(); // ||B²v|| ≈ λ², so λ ≈ sqrt
        let wn = w / norm;
        let done = (new_est - est).abs() <= 1e-10 * new_est.max(f64::MIN_POSITIVE);
        est = new_est;
        v = wn;
        if done {
            break;
        }
    }
    est
}

/// Relative covariance error ‖Σ − S‖₂ / ‖Σ‖₂ via power iteration.
pub fn cov_rel_error(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != sigma.nrows() || s.ncols() != sigma.ncols() || s.nrows() != s.ncols() {
        return Err(Error::contract("covariance dimension mismatch"));
    }
    if s.nrows() > TRACKER_GATE {
        return Err(Error::ResourceCap(format!("cov_rel_error gated to n <= {TRACKER_GATE}")));
    }
    let diff = sigma - s;
    let num = sym_abs_norm(&diff);
    let den = sym_abs_norm(sigma);
    if den == 0.0 {
        return Err(Error::contract("reference covariance has zero norm"));
    }
    Ok(num / den)
}

/// Which iteration the oracle propagates moments for.
#[derive(Debug, Clone, Copy)]
pub enum OracleSchedule {
    /// First-order stationary sampler with Var(c) = Mᵀ + N.
    Stationary,
    /// Second-order Chebyshev sampler with Var(c⁽ᵏ⁾) = a_k M + b_k N.
    Chebyshev(EigEstimate),
}

/// Exact dense moment propagation of a splitting sampler: the first-order map
/// Γ ↦ GΓGᵀ + M⁻¹Var(c)M⁻ᵀ, or the second-order block recursion on
/// Var([y⁽ᵏ⁾; y⁽ᵏ⁻¹⁾]) including the lag-1 cross covariance K⁽ᵏ⁾.
pub struct ExactMomentOracle {
    n: usize,
    schedule: OracleSchedule,
    m_dense: DMatrix<f64>,
    m_inv: DMatrix<f64>,
    a_dense: DMatrix<f64>,
    nu: DVector<f64>,
    // second-order scalar state
    cheby: Option<ChebyState>,
    kappa: Option<f64>,
    k: usize,
    mean: DVector<f64>,
    mean_prev: DVector<f64>,
    cov: DMatrix<f64>, // n×n (stationary) or 2n×2n (Chebyshev block form)
}

impl ExactMomentOracle {
    pub fn new(
        splitting: &Splitting<'_>,
        schedule: OracleSchedule,
        nu: Option<&[f64]>,
        mean0: &[f64],
        cov0: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = splitting.n();
        if n > ORACLE_GATE {
            return Err(Error::ResourceCap(format!(
                "exact moment oracle gated to n <= {ORACLE_GATE}, got {n}"
            )));
        }
        if mean0.len() != n || cov0.nrows() != n || cov0.ncols() != n {
            return Err(Error::contract("oracle initial moments dimension mismatch"));
        }
        if let OracleSchedule::Chebyshev(_) = schedule {
            if !splitting.is_symmetric() {
                return Err(Error::contract("Chebyshev oracle needs a symmetric splitting"));
            }
        }
        let mut flops = FlopCounter::new();
        let mut m_dense = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = splitting.apply_m(&e, &mut flops)?;
            for i in 0..n {
                m_dense[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        let a_dense = splitting.matrix().to_dense();
        let m_inv = m_dense
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::numeric("M is singular"))?;
        let nu = match nu {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::contract("oracle nu dimension mismatch"));
                }
                DVector::from_column_slice(v)
            }
            None => DVector::zeros(n),
        };
        let (cheby, cov) = match schedule {
            OracleSchedule::Stationary => (None, cov0.clone()),
            OracleSchedule::Chebyshev(eig) => {
                let mut big = DMatrix::zeros(2 * n, 2 * n);
                big.view_mut((0, 0), (n, n)).copy_from(cov0);
                (Some(ChebyState::new(&eig)?), big)
            }
        };
        Ok(ExactMomentOracle {
            n,
            schedule,
            m_dense,
            m_inv,
            a_dense,
            nu,
            cheby,
            kappa: None,
            k: 0,
            mean: DVector::from_column_slice(mean0),
            mean_prev: DVector::zeros(n),
            cov,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Var(y⁽ᵏ⁾).
    pub fn cov(&self) -> DMatrix<f64> {
        match self.schedule {
            OracleSchedule::Stationary => self.cov.clone(),
            OracleSchedule::Chebyshev(_) => self.cov.view((0, 0), (self.n, self.n)).into(),
        }
    }

    /// Lag-1 cross covariance K⁽ᵏ⁾ = Cov(y⁽ᵏ⁻¹⁾, y⁽ᵏ⁾) (second-order only).
    pub fn cross_cov(&self) -> Result<DMatrix<f64>> {
        match self.schedule {
            OracleSchedule::Stationary => {
                Err(Error::contract("cross covariance is tracked by the second-order oracle"))
            }
            OracleSchedule::Chebyshev(_) => {
                Ok(self.cov.view((0, self.n), (self.n, self.n)).transpose())
            }
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.n;
        match self.schedule {
            OracleSchedule::Stationary => {
                let g = DMatrix::identity(n, n) - &self.m_inv * &self.a_dense;
                // Var(c) = Mᵀ + N = Mᵀ + M − A
                let var_c = self.m_dense.transpose() + &self.m_dense - &self.a_dense;
                let noise = &self.m_inv * var_c * self.m_inv.transpose();
                self.cov = &g * &self.cov * g.transpose() + noise;
                self.cov = (&self.cov + self.cov.transpose()) * 0.5;
                self.mean = &g * &self.mean + &self.m_inv * &self.nu;
            }
            OracleSchedule::Chebyshev(_) => {
                let st = self.cheby.as_ref().unwrap();
                let coeffs = cheby_noise_coeffs_next(self.kappa, st)?;
                let (alpha, tau) = (st.alpha, st.tau);
                let g_tau = DMatrix::identity(n, n) - (&self.m_inv * &self.a_dense) * tau;
                // 𝒢 = [[αG_τ, (1−α)I], [I, 0]]
                let mut big_g = DMatrix::zeros(2 * n, 2 * n);
                big_g.view_mut((0, 0), (n, n)).copy_from(&(&g_tau * alpha));
                big_g
                    .view_mut((0, n), (n, n))
                    .copy_from(&(DMatrix::identity(n, n) * (1.0 - alpha)));
                big_g.view_mut((n, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
                let n_dense = &self.m_dense - &self.a_dense;
                let var_c = &self.m_dense * coeffs.a + n_dense * coeffs.b;
                let var_g = (&self.m_inv * var_c * self.m_inv.transpose()) * (tau * tau);
                self.cov = &big_g * &self.cov * big_g.transpose();
                {
                    let mut top = self.cov.view_mut((0, 0), (n, n));
                    top += var_g * (alpha * alpha);
                }
                let new_mean =
                    &g_tau * &self.mean * alpha + &self.mean_prev * (1.0 - alpha)
                        + (&self.m_inv * &self.nu) * (alpha * tau);
                self.mean_prev = std::mem::replace(&mut self.mean, new_mean);
                self.kappa = Some(coeffs.kappa_next);
                self.cheby = Some(st.advance());
            }
        }
        self.k += 1;
        Ok(())
    }

    pub fn propagate(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Dense M⁻¹A, shared by the polynomial identity tests.
    pub fn m_inv_a(&self) -> DMatrix<f64> {
        &self.m_inv * &self.a_dense
    }

    /// Dense A⁻¹.
    pub fn a_inverse(&self) -> Result<DMatrix<f64>> {
        self.a_dense
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::numeric("A is singular"))
    }
}

/// Operation-style alias for advancing the oracle.
pub fn propagate_exact(oracle: &mut ExactMomentOracle, steps: usize) -> Result<()> {
    oracle.propagate(steps)
}

/// The error polynomial P_k generated by an (α_k, τ_k) schedule through
/// P_{k+1}(λ) = (α_k − α_k τ_k λ) P_k(λ) + (1 − α_k) P_{k−1}(λ),
/// P₀ ≡ 1, P₁(λ) = 1 − τ₀λ.
#[derive(Debug, Clone)]
pub struct ErrorPolynomial {
    schedule: Vec<(f64, f64)>,
}

impl ErrorPolynomial {
    /// The stationary schedule α = τ = 1 of the requested length.
    pub fn stationary(len: usize) -> Self {
        ErrorPolynomial { schedule: vec![(1.0, 1.0); len] }
    }

    /// The Chebyshev schedule for the eigenvalue interval.
    pub fn chebyshev(eig: &EigEstimate, len: usize) -> Result<Self> {
        let mut st = ChebyState::new(eig)?;
        let mut schedule = Vec::with_capacity(len);
        for _ in 0..len {
            schedule.push((st.alpha, st.tau));
            st = st.advance();
        }
        Ok(ErrorPolynomial { schedule })
    }

    pub fn from_schedule(schedule: Vec<(f64, f64)>) -> Self {
        ErrorPolynomial { schedule }
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// P_k(λ) by the scalar three-term recursion.
    pub fn eval(&self, lambda: f64, k: usize) -> Result<f64> {
        if k > self.schedule.len() {
            return Err(Error::contract(format!(
                "schedule holds {} steps, asked for P_{k}",
                self.schedule.len()
            )));
        }
        if k == 0 {
            return Ok(1.0);
        }
        let tau0 = self.schedule[0].1;
        let mut p_prev = 1.0;
        let mut p = 1.0 - tau0 * lambda;
        for step in 1..k {
            let (alpha, tau) = self.schedule[step];
            let next = (alpha - alpha * tau * lambda) * p + (1.0 - alpha) * p_prev;
            p_prev = p;
            p = next;
        }
        Ok(p)
    }

    /// P_k(M̃) for a dense operator, by the same recursion on matrices.
    pub fn eval_matrix(&self, m_tilde: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        if k > self.schedule.len() {
            return Err(Error::contract("schedule shorter than requested order"));
        }
        let n = m_tilde.nrows();
        if k == 0 {
            return Ok(DMatrix::identity(n, n));
        }
        let tau0 = self.schedule[0].1;
        let mut p_prev = DMatrix::identity(n, n);
        let mut p = DMatrix::identity(n, n) - m_tilde * tau0;
        for step in 1..k {
            let (alpha, tau) = self.schedule[step];
            let next = (&p - m_tilde * &p * tau) * alpha + &p_prev * (1.0 - alpha);
            p_prev = std::mem::replace(&mut p, next);
        }
        Ok(p)
    }
}

/// Operation-style alias for scalar evaluation.
pub fn eval_error_polynomial(p: &ErrorPolynomial, lambda: f64, k: usize) -> Result<f64> {
    p.eval(lambda, k)
}

/// Least-squares decay factor of a positive sequence over the window
/// [k/2, k]: fits log h ≈ c + k·log f and returns f.
pub fn fit_decay_factor(history: &[f64]) -> Result<f64> {
    if history.len() < 4 {
        return Err(Error::contract("need at least 4 points to fit a decay factor"));
    }
    if history.iter().any(|&h| h <= 0.0) {
        return Err(Error::contract("decay fitting needs positive entries"));
    }
    let last = history.len() - 1;
    let start = last / 2;
    let m = (last - start + 1) as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (idx, &h) in history.iter().enumerate().skip(start) {
        let x = idx as f64;
        let y = h.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Ok(slope.exp())
}
