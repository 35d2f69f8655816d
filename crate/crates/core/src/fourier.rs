//! Discretization grid and truncated Fourier coefficients of the square-root
//! Gaussian amplitude.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;

use crate::error::param;
use crate::gaussian::CovarianceMatrix;
use crate::linalg::{ksum, CMat};
use crate::tensor::Tensor;
use crate::{Error, Result, C64};

/// Dense coefficient tensors are limited to `2^(m D) <= 2^24`.
pub const DENSE_BITS: usize = 24;
/// Exact normalisation is summed up to this many coefficients.
const EXACT_NORM_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Qubits per dimension.
    pub n: usize,
    /// Box width; each axis spans [-a/2, a/2].
    pub a: f64,
    /// Fourier qubits per dimension.
    pub m: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, a: f64, m: usize) -> Result<Self> {
        let g = GridSpec { dim, n, a, m };
        g.validate()?;
        Ok(g)
    }

    /// `a = 20`, `n = 8`, `m = 5`.
    pub fn with_defaults(dim: usize) -> Self {
        GridSpec { dim, n: 8, a: 20.0, m: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(param("dimension must be at least 1"));
        }
        if self.m == 0 || self.m > self.n || self.n > 30 {
            return Err(param("need 1 <= m <= n <= 30"));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(param("box width must be positive"));
        }
        Ok(())
    }

    /// Number of kept wavenumbers per dimension.
    pub fn modes(&self) -> usize {
        1 << self.m
    }

    pub fn points(&self) -> usize {
        1 << self.n
    }

    pub fn qubits(&self) -> usize {
        self.n * self.dim
    }

    /// Grid coordinate of digit `b` along one axis.
    pub fn coordinate(&self, b: usize) -> f64 {
        -self.a / 2.0 + self.a * b as f64 / self.points() as f64
    }
}

/// Signed wavenumber stored at basis index `idx` (nonnegative first).
pub fn wavenumber(idx: usize, modes: usize) -> i64 {
    if idx < modes / 2 {
        idx as i64
    } else {
        idx as i64 - modes as i64
    }
}

/// Basis index of signed wavenumber `k`.
pub fn basis_index(k: i64, modes: usize) -> usize {
    k.rem_euclid(modes as i64) as usize
}

#[derive(Debug, Clone)]
pub struct FourierEvaluator {
    grid: GridSpec,
    sigma: CovarianceMatrix,
    /// Multiplier turning the closed-form exponential into a unit-norm coefficient.
    norm: f64,
    scale: f64,
}

impl FourierEvaluator {
    pub fn new(grid: GridSpec, sigma: CovarianceMatrix) -> Result<Self> {
        grid.validate()?;
        if sigma.dim() != grid.dim {
            return Err(Error::DimensionMismatch(sigma.dim(), grid.dim));
        }
        let scale = (2.0 * PI / grid.a).powi(2);
        let mut ev = FourierEvaluator { grid, sigma, norm: 1.0, scale };
        ev.norm = 1.0 / ev.sum_of_squares().sqrt();
        Ok(ev)
    }

    fn quad(&self, k: &[i64]) -> f64 {
        let d = self.grid.dim;
        let mut s = 0.0;
        for i in 0..d {
            if k[i] == 0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..d {
                row += self.sigma.get(i, j) * k[j] as f64;
            }
            s += k[i] as f64 * row;
        }
        s
    }

    fn raw(&self, k: &[i64]) -> f64 {
        let sign = if k.iter().sum::<i64>().rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        sign * (-self.scale * self.quad(k)).exp()
    }

    /// Sum of squared raw coefficients: exact for small grids, otherwise the
    /// leading Poisson-summation term (Gaussian integral over the lattice).
    fn sum_of_squares(&self) -> f64 {
        let modes = self.grid.modes();
        let total = (modes as f64).powi(self.grid.dim as i32);
        if total <= EXACT_NORM_LIMIT as f64 {
            let mut acc = Vec::with_capacity(total as usize);
            let mut idx = vec![0usize; self.grid.dim];
            let mut k = vec![0i64; self.grid.dim];
            loop {
                for (kk, &i) in k.iter_mut().zip(&idx) {
                    *kk = wavenumber(i, modes);
                }
                acc.push((-2.0 * self.scale * self.quad(&k)).exp());
                if !advance(&mut idx, modes) {
                    break;
                }
            }
            return ksum(acc);
        }
        let det = self.sigma.entries().clone().determinant();
        (PI / (2.0 * self.scale)).powf(self.grid.dim as f64 / 2.0) / det.sqrt()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sigma(&self) -> &CovarianceMatrix {
        &self.sigma
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Normalised signed coefficient for wavenumbers `k` in [-M/2, M/2 - 1].
    pub fn coeff(&self, k: &[i64]) -> Result<f64> {
        let half = (self.grid.modes() / 2) as i64;
        if k.len() != self.grid.dim {
            return Err(Error::DimensionMismatch(k.len(), self.grid.dim));
        }
        if let Some(bad) = k.iter().find(|&&x| x < -half || x >= half) {
            return Err(Error::Index(format!("wavenumber {bad} outside [{}, {})", -half, half)));
        }
        Ok(self.norm * self.raw(k))
    }

    /// Coefficient at basis indices (one per dimension, each in 0..M).
    pub fn coeff_at(&self, idx: &[usize]) -> f64 {
        let modes = self.grid.modes();
        let mut k = [0i64; 32];
        let mut heap;
        let k: &mut [i64] = if idx.len() <= 32 {
            &mut k[..idx.len()]
        } else {
            heap = vec![0i64; idx.len()];
            &mut heap
        };
        for (kk, &i) in k.iter_mut().zip(idx) {
            *kk = wavenumber(i, modes);
        }
        self.norm * self.raw(k)
    }

    /// All `M^D` coefficients, dimension 0 most significant.
    pub fn dense_coeff_tensor(&self) -> Result<Tensor> {
        if self.grid.m * self.grid.dim > DENSE_BITS {
            return Err(Error::Capacity(format!("2^{} coefficients", self.grid.m * self.grid.dim)));
        }
        let shape = vec![self.grid.modes(); self.grid.dim];
        Ok(Tensor::from_fn(&shape, |idx| C64::new(self.coeff_at(idx), 0.0)))
    }
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for ax in (0..idx.len()).rev() {
        idx[ax] += 1;
        if idx[ax] < base {
            return true;
        }
        idx[ax] = 0;
    }
    false
}

/// Normalised square-root density sampled on the `2^(n D)` grid points.
pub fn exact_target(grid: &GridSpec, sigma: &CovarianceMatrix) -> Result<Vec<f64>> {
    grid.validate()?;
    if sigma.dim() != grid.dim {
        return Err(Error::DimensionMismatch(sigma.dim(), grid.dim));
    }
    if grid.qubits() > DENSE_BITS {
        return Err(Error::Capacity(format!("2^{} grid points", grid.qubits())));
    }
    let prec =
        sigma.entries().clone().try_inverse().ok_or_else(|| Error::IllConditioned("covariance is singular".into()))?;
    let d = grid.dim;
    let pts = grid.points();
    let mut out = Vec::with_capacity(1 << grid.qubits());
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for (xi, &b) in x.iter_mut().zip(&idx) {
            *xi = grid.coordinate(b);
        }
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] * prec[(i, j)] * x[j];
            }
        }
        out.push((-q / 4.0).exp());
        if !advance(&mut idx, pts) {
            break;
        }
    }
    let nrm = ksum(out.iter().map(|v| v * v)).sqrt();
    for v in out.iter_mut() {
        *v /= nrm;
    }
    Ok(out)
}

/// `2^n x 2^m` inverse DFT restricted to the kept wavenumbers:
/// entry `(b, i) = exp(2 pi i b k(i) / 2^n) / sqrt(2^n)`.
pub fn inverse_dft_matrix(n: usize, m: usize) -> CMat {
    let pts = 1usize << n;
    let modes = 1usize << m;
    let s = 1.0 / (pts as f64).sqrt();
    CMat::from_fn(pts, modes, |b, i| {
        let k = wavenumber(i, modes);
        // reduce the phase exactly before converting to floating point
        let r = (b as i64 * k).rem_euclid(pts as i64) as f64;
        let ang = 2.0 * PI * r / pts as f64;
        C64::new(s * ang.cos(), s * ang.sin())
    })
}

/// Applies the per-dimension inverse DFT to a dense coefficient tensor,
/// giving the `2^(n D)` loaded amplitudes.
pub fn load_amplitudes(grid: &GridSpec, coeffs: &Tensor) -> Result<Vec<C64>> {
    if grid.qubits() > DENSE_BITS {
        return Err(Error::Capacity(format!("2^{} grid points", grid.qubits())));
    }
    let f = inverse_dft_matrix(grid.n, grid.m);
    let mut t = coeffs.clone();
    for ax in 0..grid.dim {
        t = t.apply_matrix(ax, &f)?;
    }
    Ok(t.into_data())
}

/// Squared overlap between the Fourier-loaded state and the exact target;
/// the best fidelity any compression of the coefficients can reach.
pub fn truncation_fidelity(ev: &FourierEvaluator) -> Result<f64> {
    let coeffs = ev.dense_coeff_tensor()?;
    let loaded = load_amplitudes(ev.grid(), &coeffs)?;
    let target: Vec<C64> = exact_target(ev.grid(), ev.sigma())?.into_iter().map(|x| C64::new(x, 0.0)).collect();
    crate::ttn::overlap_fidelity(&target, &loaded)
}

/// Reference coefficients by direct DFT of the sampled amplitude; indices in
/// the same layout as [`FourierEvaluator::dense_coeff_tensor`], normalised
/// over the kept wavenumbers.
pub fn sampled_dft_coeffs(grid: &GridSpec, sigma: &CovarianceMatrix) -> Result<Tensor> {
    let target = exact_target(grid, sigma)?;
    let f = inverse_dft_matrix(grid.n, grid.m).adjoint();
    let shape = vec![grid.points(); grid.dim];
    let mut t = Tensor::from_vec(&shape, target.into_iter().map(|x| C64::new(x, 0.0)).collect())?;
    for ax in 0..grid.dim {
        t = t.apply_matrix(ax, &f)?;
    }
    let nrm = t.norm();
    t.scale(C64::new(1.0 / nrm, 0.0));
    Ok(t)
}
