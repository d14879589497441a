//! Experiment model builders: the 2-D first-order locally linear lattice
//! precision, a 3-D squared-Helmholtz prior with Robin-type boundaries, the
//! vertical-averaging forward model, phantom and synthetic data, and the
//! posterior precision assembly A = FᵀPF + Q.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sparse::SparseSpd;

/// Regularization added to the lattice diagonal; sets ‖A⁻¹‖₂ = 1/δ.
pub const LATTICE_DELTA: f64 = 1e-4;

/// First-order locally linear precision on an m×m unit-spaced grid:
/// `[A]_ij = δ·1{i=j} + (n_i if i=j; −1 if 0 < ‖s_i−s_j‖ ≤ 1; 0 otherwise)`
/// with δ = 1e-4 and n_i the number of grid neighbours of node i.
pub fn lattice2d_precision(m: usize) -> Result<SparseSpd> {
    lattice2d_precision_with_delta(m, LATTICE_DELTA)
}

pub fn lattice2d_precision_with_delta(m: usize, delta: f64) -> Result<SparseSpd> {
    if m < 2 {
        return Err(Error::parameter("lattice side length must be at least 2"));
    }
    let n = m * m;
    let idx = |i: usize, j: usize| i * m + j;
    let mut triplets = Vec::with_capacity(5 * n);
    for i in 0..m {
        for j in 0..m {
            let p = idx(i, j);
            let mut degree = 0.0;
            let mut push = |q: usize| triplets.push((p, q, -1.0));
            if i > 0 {
                push(idx(i - 1, j));
                degree += 1.0;
            }
            if i + 1 < m {
                push(idx(i + 1, j));
                degree += 1.0;
            }
            if j > 0 {
                push(idx(i, j - 1));
                degree += 1.0;
            }
            if j + 1 < m {
                push(idx(i, j + 1));
                degree += 1.0;
            }
            triplets.push((p, p, delta + degree));
        }
    }
    SparseSpd::from_triplets(n, &triplets)
}

/// Node counts of a 3-D grid over the unit cube; voxel centres at
/// ((i+½)/nx, (j+½)/ny, (k+½)/nz).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridDims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        GridDims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    pub fn to_vec(self) -> Vec<usize> {
        vec![self.nx, self.ny, self.nz]
    }
}

/// The Helmholtz-form Hessian H on the grid, discretized from the variational
/// form ∫(R/4·|∇x|² + x²/(4R)) dv + ∫ x²/2 ds: face differences carry
/// (R·h/4)·(x_j−x_i)², the volume term h³/(4R) per node, and each exposed
/// boundary face contributes h²/2 to its node — the local Robin modification.
fn helmholtz3d_operator(dims: GridDims, r_len: f64) -> Result<SparseSpd> {
    let GridDims { nx, ny, nz } = dims;
    if nx < 4 || ny < 4 || nz < 4 {
        return Err(Error::parameter("helmholtz3d needs at least 4 nodes per axis"));
    }
    if r_len <= 0.0 {
        return Err(Error::parameter("correlation length R must be positive"));
    }
    let hx = 1.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    let hz = 1.0 / nz as f64;
    let n = dims.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * n);
    let vol = hx * hy * hz;
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let p = dims.index(i, j, k);
                let mut diag = vol / (4.0 * r_len);
                // per-axis face weight (R/4)·(area/h) = (R/4)·(vol/h²)
                let mut couple = |q: usize, h: f64| {
                    let w = r_len / 4.0 * vol / (h * h);
                    triplets.push((p, q, -w));
                    diag += w;
                };
                let mut exposed_area = 0.0;
                if i > 0 { couple(dims.index(i - 1, j, k), hx); } else { exposed_area += hy * hz; }
                if i + 1 < nx { couple(dims.index(i + 1, j, k), hx); } else { exposed_area += hy * hz; }
                if j > 0 { couple(dims.index(i, j - 1, k), hy); } else { exposed_area += hx * hz; }
                if j + 1 < ny { couple(dims.index(i, j + 1, k), hy); } else { exposed_area += hx * hz; }
                if k > 0 { couple(dims.index(i, j, k - 1), hz); } else { exposed_area += hx * hy; }
                if k + 1 < nz { couple(dims.index(i, j, k + 1), hz); } else { exposed_area += hx * hy; }
                diag += exposed_area / 2.0;
                triplets.push((p, p, diag));
            }
        }
    }
    SparseSpd::from_triplets(n, &triplets)
}

/// The squared-Helmholtz prior precision Q_R = H·H as an explicit sparse
/// product. R is the correlation length in units of the domain width.
pub fn helmholtz3d_precision(dims: GridDims, r_len: f64) -> Result<SparseSpd> {
    let h = helmholtz3d_operator(dims, r_len)?;
    let q = sparse_square(&h)?;
    Ok(q)
}

/// Both factors of the prior: (H, Q = H²). H is useful for the Q = H(H·x) test.
pub fn helmholtz3d_factors(dims: GridDims, r_len: f64) -> Result<(SparseSpd, SparseSpd)> {
    let h = helmholtz3d_operator(dims, r_len)?;
    let q = sparse_square(&h)?;
    Ok((h, q))
}

/// Explicit sparse product H·H for symmetric H.
fn sparse_square(h: &SparseSpd) -> Result<SparseSpd> {
    let n = h.n();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut acc: Vec<f64> = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    for i in 0..n {
        for (k, vik) in h.row(i) {
            for (j, vkj) in h.row(k) {
                if acc[j] == 0.0 {
                    touched.push(j);
                }
                acc[j] += vik * vkj;
            }
        }
        for &j in &touched {
            let v = acc[j];
            if v != 0.0 || j == i {
                triplets.push((i, j, v));
            }
            acc[j] = 0.0;
        }
        touched.clear();
    }
    SparseSpd::from_triplets(n, &triplets)
        .map_err(|e| Error::ModelAssembly(format!("H·H assembly failed: {e}")))
}

/// The CSLM-style forward model: block averaging over `v` voxels in the
/// vertical dimension. Each row of F holds exactly `v` entries equal to 1/v.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub dims: GridDims,
    pub v: usize,
    /// Diagonal observation precision P (one entry per data point).
    pub obs_precision: f64,
}

impl ForwardModel {
    pub fn new(dims: GridDims, v: usize) -> Result<Self> {
        if v == 0 || dims.nz % v != 0 {
            return Err(Error::parameter(format!(
                "vertical averaging width {v} must divide nz = {}",
                dims.nz
            )));
        }
        Ok(ForwardModel { dims, v, obs_precision: 1.0 })
    }

    pub fn data_len(&self) -> usize {
        self.dims.nx * self.dims.ny * (self.dims.nz / self.v)
    }

    pub fn image_len(&self) -> usize {
        self.dims.len()
    }

    fn data_index(&self, i: usize, j: usize, s: usize) -> usize {
        (i * self.dims.ny + j) * (self.dims.nz / self.v) + s
    }

    /// y = F x.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.image_len() {
            return Err(Error::contract("forward model image length mismatch"));
        }
        let slabs = self.dims.nz / self.v;
        let mut y = vec![0.0; self.data_len()];
        for i in 0..self.dims.nx {
            for j in 0..self.dims.ny {
                for s in 0..slabs {
                    let mut acc = 0.0;
                    for t in 0..self.v {
                        acc += x[self.dims.index(i, j, s * self.v + t)];
                    }
                    y[self.data_index(i, j, s)] = acc / self.v as f64;
                }
            }
        }
        Ok(y)
    }

    /// x = Fᵀ y.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.data_len() {
            return Err(Error::contract("forward model data length mismatch"));
        }
        let slabs = self.dims.nz / self.v;
        let mut x = vec![0.0; self.image_len()];
        for i in 0..self.dims.nx {
            for j in 0..self.dims.ny {
                for s in 0..slabs {
                    let val = y[self.data_index(i, j, s)] / self.v as f64;
                    for t in 0..self.v {
                        x[self.dims.index(i, j, s * self.v + t)] = val;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Dense row weights for tests: (data rows, image cols) = (1/v on the block).
    pub fn row_entries(&self, row: usize) -> Vec<(usize, f64)> {
        let slabs = self.dims.nz / self.v;
        let s = row % slabs;
        let ij = row / slabs;
        let j = ij % self.dims.ny;
        let i = ij / self.dims.ny;
        (0..self.v)
            .map(|t| (self.dims.index(i, j, s * self.v + t), 1.0 / self.v as f64))
            .collect()
    }
}

/// Constructs the vertical-averaging forward model (alias with the operation
/// name used at the CLI surface).
pub fn biofilm_forward(dims: GridDims, v: usize) -> Result<ForwardModel> {
    ForwardModel::new(dims, v)
}

/// Half-ellipsoid indicator phantom, value 10 inside, attached to the z = 0
/// face. Default semi-axes (0.35·nx, 0.35·ny, 0.45·nz), centre on the face.
pub fn phantom_ellipsoid(dims: GridDims) -> Vec<f64> {
    phantom_ellipsoid_with(dims, (0.35, 0.35, 0.45), 10.0)
}

pub fn phantom_ellipsoid_with(dims: GridDims, semi_frac: (f64, f64, f64), value: f64) -> Vec<f64> {
    let (ax, ay, az) = (
        semi_frac.0 * dims.nx as f64,
        semi_frac.1 * dims.ny as f64,
        semi_frac.2 * dims.nz as f64,
    );
    let (cx, cy) = (dims.nx as f64 / 2.0, dims.ny as f64 / 2.0);
    let mut x = vec![0.0; dims.len()];
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            for k in 0..dims.nz {
                let (px, py, pz) = (i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                let q = ((px - cx) / ax).powi(2) + ((py - cy) / ay).powi(2) + (pz / az).powi(2);
                if q <= 1.0 {
                    x[dims.index(i, j, k)] = value;
                }
            }
        }
    }
    x
}

/// y = F·x_true + P^{-1/2}·z with z standard normal. Pass `noise: false` to
/// suppress the noise term (the P → ∞ limit).
pub fn synth_data<R: Rng + ?Sized>(
    x_true: &[f64],
    forward: &ForwardModel,
    noise: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut y = forward.apply(x_true)?;
    if noise {
        let scale = 1.0 / forward.obs_precision.sqrt();
        for yi in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *yi += scale * z;
        }
    }
    Ok(y)
}

/// The assembled posterior target: precision A = FᵀPF + Q and noise mean
/// ν = FᵀPy, so the target mean μ = A⁻¹ν is never formed explicitly.
pub struct Posterior {
    pub precision: SparseSpd,
    pub nu: Vec<f64>,
}

/// Assembles A = FᵀPF + Q and ν = FᵀPy. Fails if the sum is not SPD
/// (e.g. a zero prior with rank-deficient FᵀPF).
pub fn posterior_spec(
    forward: &ForwardModel,
    prior: Option<&SparseSpd>,
    y: &[f64],
) -> Result<Posterior> {
    if y.len() != forward.data_len() {
        return Err(Error::contract("posterior data length mismatch"));
    }
    let dims = forward.dims;
    let n = forward.image_len();
    let p = forward.obs_precision;
    let v = forward.v;
    let slabs = dims.nz / v;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    // FᵀPF couples voxels within the same vertical block: P/v² on each pair.
    let w = p / (v as f64 * v as f64);
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            for s in 0..slabs {
                for t1 in 0..v {
                    let p1 = dims.index(i, j, s * v + t1);
                    for t2 in 0..v {
                        let p2 = dims.index(i, j, s * v + t2);
                        triplets.push((p1, p2, w));
                    }
                }
            }
        }
    }
    if let Some(q) = prior {
        if q.n() != n {
            return Err(Error::contract("prior dimension mismatch"));
        }
        for i in 0..n {
            for (j, val) in q.row(i) {
                triplets.push((i, j, val));
            }
        }
    }
    let precision = SparseSpd::from_triplets(n, &triplets).map_err(|e| {
        Error::ModelAssembly(format!("posterior precision is not valid SPD storage: {e}"))
    })?;
    // definiteness guard at desk scale: without a prior, FᵀPF alone is rank
    // deficient whenever v > 1, which from_triplets cannot see.
    if prior.is_none() && v > 1 {
        return Err(Error::ModelAssembly(
            "FᵀPF is rank deficient without a prior term; posterior is not SPD".into(),
        ));
    }
    let mut nu = forward.apply_transpose(y)?;
    for x in nu.iter_mut() {
        *x *= p;
    }
    Ok(Posterior { precision, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flops::FlopCounter;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn lattice_counts_and_row_sums() {
        let a = lattice2d_precision(10).unwrap();
        assert_eq!(a.n(), 100);
        assert_eq!(a.nnz(), 460);
        // A·1 = δ·1 exactly (graph Laplacian kills constants)
        let mut f = FlopCounter::new();
        let ones = vec![1.0; 100];
        let y = a.spmv(&ones, &mut f).unwrap();
        for v in y {
            assert_relative_eq!(v, LATTICE_DELTA, max_relative = 1e-12);
        }
    }

    #[test]
    fn lattice_two_by_two_by_hand() {
        let a = lattice2d_precision(2).unwrap();
        let expect = [
            [2.0, -1.0, -1.0, 0.0],
            [-1.0, 2.0, 0.0, -1.0],
            [-1.0, 0.0, 2.0, -1.0],
            [0.0, -1.0, -1.0, 2.0],
        ];
        let d = a.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                let want = expect[i][j] + if i == j { LATTICE_DELTA } else { 0.0 };
                assert_relative_eq!(d[(i, j)], want, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn helmholtz_q_is_h_squared_and_spd() {
        let dims = GridDims::new(8, 8, 8);
        let (h, q) = helmholtz3d_factors(dims, 0.25).unwrap();
        let mut f = FlopCounter::new();
        let x: Vec<f64> = (0..dims.len()).map(|i| ((i * 31 % 17) as f64) - 8.0).collect();
        let hhx = h.spmv(&h.spmv(&x, &mut f).unwrap(), &mut f).unwrap();
        let qx = q.spmv(&x, &mut f).unwrap();
        let scale: f64 = qx.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..dims.len() {
            assert!((hhx[i] - qx[i]).abs() <= 1e-12 * scale);
        }
        // SPD by dense eigencheck at 8³ = 512
        let eig = q.to_dense().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        // symmetry residual
        let d = q.to_dense();
        let sym = (&d - d.transpose()).norm();
        assert!(sym <= 1e-12 * d.norm());
    }

    #[test]
    fn forward_model_small_case() {
        let fm = ForwardModel::new(GridDims::new(2, 2, 4), 2).unwrap();
        assert_eq!(fm.data_len(), 8);
        assert_eq!(fm.image_len(), 16);
        for row in 0..fm.data_len() {
            let entries = fm.row_entries(row);
            assert_eq!(entries.len(), 2);
            assert!(entries.iter().all(|&(_, w)| w == 0.5));
        }
        // averaging preserves constants
        let x = vec![3.25; 16];
        let y = fm.apply(&x).unwrap();
        assert!(y.iter().all(|&v| (v - 3.25).abs() < 1e-15));
    }

    #[test]
    fn forward_model_full_scale_shape() {
        let fm = ForwardModel::new(GridDims::new(100, 100, 100), 10).unwrap();
        assert_eq!(fm.data_len(), 100_000);
        assert_eq!(fm.image_len(), 1_000_000);
    }

    #[test]
    fn forward_model_divisibility() {
        assert!(ForwardModel::new(GridDims::new(4, 4, 10), 3).is_err());
    }

    #[test]
    fn phantom_values_and_mass() {
        let dims = GridDims::new(50, 50, 50);
        let x = phantom_ellipsoid(dims);
        // centre of the column interior
        assert_eq!(x[dims.index(25, 25, 2)], 10.0);
        // far corner
        assert_eq!(x[dims.index(49, 49, 49)], 0.0);
        let mass: f64 = x.iter().sum();
        let (ax, ay, az) = (0.35 * 50.0, 0.35 * 50.0, 0.45 * 50.0);
        let analytic = 10.0 * (2.0 / 3.0) * std::f64::consts::PI * ax * ay * az;
        assert!(
            (mass - analytic).abs() <= 0.05 * analytic,
            "mass {mass} vs analytic {analytic}"
        );
    }

    #[test]
    fn synth_data_noise_behaviour() {
        let dims = GridDims::new(6, 6, 6);
        let fm = ForwardModel::new(dims, 2).unwrap();
        let x = phantom_ellipsoid(dims);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let clean = synth_data(&x, &fm, false, &mut rng).unwrap();
        let fx = fm.apply(&x).unwrap();
        assert_eq!(clean, fx);
        let y1 = synth_data(&x, &fm, true, &mut ChaCha12Rng::seed_from_u64(4)).unwrap();
        let y2 = synth_data(&x, &fm, true, &mut ChaCha12Rng::seed_from_u64(4)).unwrap();
        assert_eq!(y1, y2);
        // empirical residual variance ≈ 1 per component under P = I
        let m = fm.data_len() as f64;
        let var: f64 = y1.iter().zip(&fx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m;
        assert!((var - 1.0).abs() <= 5.0 * (2.0 / m).sqrt(), "residual variance {var}");
    }

    #[test]
    fn posterior_identity_case() {
        // F = I (v = 1), P = I, Q = I → A = 2I, ν = y.
        let dims = GridDims::new(2, 2, 2);
        let fm = ForwardModel::new(dims, 1).unwrap();
        let n = dims.len();
        let eye =
            SparseSpd::from_triplets(n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let post = posterior_spec(&fm, Some(&eye), &y).unwrap();
        assert_eq!(post.nu, y);
        let d = post.precision.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[(i, j)], if i == j { 2.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn posterior_without_prior_is_rejected() {
        let dims = GridDims::new(2, 2, 4);
        let fm = ForwardModel::new(dims, 2).unwrap();
        let y = vec![1.0; fm.data_len()];
        assert!(matches!(
            posterior_spec(&fm, None, &y),
            Err(Error::ModelAssembly(_))
        ));
    }
}
