//! Periodic grids on `[−L, L)ⁿ` (n = 1, 2) with cached FFT plans, and real
//! fields carried in both physical and Fourier representation.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    npts: usize,
    half_len: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("npts", &self.npts)
            .field("half_len", &self.half_len)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.npts == other.npts && self.half_len == other.half_len
    }
}

impl Grid {
    /// `npts` points per axis (a power of two, at least 4) on `[−half_len, half_len)^dim`.
    pub fn new(dim: usize, npts: usize, half_len: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParams(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if npts < 4 || !npts.is_power_of_two() {
            return Err(Error::InvalidParams(format!("grid size must be a power of two >= 4, got {npts}")));
        }
        if !(half_len > 0.0 && half_len.is_finite()) {
            return Err(Error::InvalidParams(format!("box half-length must be positive, got {half_len}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            npts,
            half_len,
            forward: planner.plan_fft_forward(npts),
            inverse: planner.plan_fft_inverse(npts),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    pub fn half_len(&self) -> f64 {
        self.half_len
    }

    /// Total number of grid points, `Nⁿ`.
    pub fn len(&self) -> usize {
        self.npts.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_len / self.npts as f64
    }

    /// Volume element `dxⁿ`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Coordinate of the `i`-th point along an axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_len + i as f64 * self.dx()
    }

    /// Coordinates of the flattened point `idx` (row-major, first axis slowest).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coord(idx), 0.0]
        } else {
            [self.coord(idx / self.npts), self.coord(idx % self.npts)]
        }
    }

    /// Euclidean norm of the flattened point `idx`.
    pub fn radius(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Signed wavenumber `ξ_k = πk/L` for FFT index `k`, with `k ∈ [−N/2, N/2)`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        let n = self.npts as i64;
        let ks = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        std::f64::consts::PI * ks as f64 / self.half_len
    }

    /// `|ξ|` for every flattened Fourier index.
    pub fn xi_norms(&self) -> Vec<f64> {
        let ks: Vec<f64> = (0..self.npts).map(|k| self.wavenumber(k)).collect();
        if self.dim == 1 {
            ks.iter().map(|k| k.abs()).collect()
        } else {
            let mut out = Vec::with_capacity(self.len());
            for a in &ks {
                for b in &ks {
                    out.push((a * a + b * b).sqrt());
                }
            }
            out
        }
    }

    /// True for indices kept by the 2/3 dealiasing rule (`|k_i| < N/3` on every axis).
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.npts as i64;
        let keep: Vec<bool> = (0..n)
            .map(|k| {
                let ks = if k < n / 2 { k } else { k - n };
                3 * ks.abs() < n
            })
            .collect();
        if self.dim == 1 {
            keep
        } else {
            let mut out = Vec::with_capacity(self.len());
            for a in &keep {
                for b in &keep {
                    out.push(*a && *b);
                }
            }
            out
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.npts;
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT in place, including the `1/Nⁿ` normalization.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.inverse_in_place(&mut data);
        data.iter().map(|c| c.re).collect()
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let p = self.point(idx);
                f(&p[..self.dim])
            })
            .collect()
    }
}

/// A real field on a [`Grid`], stored with both representations kept in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let coeffs = grid.forward(&values);
        Ok(Self { grid: grid.clone(), values, coeffs })
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let values = grid.inverse(&coeffs);
        Ok(Self { grid: grid.clone(), values, coeffs })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        Self::from_values(grid, grid.sample(f)).expect("sampled on the same grid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L²` inner product `dxⁿ Σ f g`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Multiply every Fourier coefficient by `g(|ξ|)`.
    pub fn apply_multiplier<F: Fn(f64) -> f64>(&self, g: F) -> SpectralField {
        let xi = self.grid.xi_norms();
        let coeffs: Vec<Complex64> = self.coeffs.iter().zip(&xi).map(|(c, &x)| c * g(x)).collect();
        SpectralField::from_coeffs(&self.grid, coeffs).expect("same grid")
    }
}

/// `(−Δ)^s` as the multiplier `|ξ|^{2s}`; the zero mode is annihilated for
/// `s > 0` and `s = 0` is the identity.
pub fn spectral_fraclap(f: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidOrder(s));
    }
    if s == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.apply_multiplier(|xi| if xi == 0.0 { 0.0 } else { xi.powf(2.0 * s) }))
}
