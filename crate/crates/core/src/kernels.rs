//! The linear propagator of `u_tt + (−Δ)^σ u + (−Δ)^δ u_t = 0`: characteristic
//! roots `λ₁,₂(|ξ|)`, the kernels `K₀`, `K₁` with their time derivatives, the
//! Duhamel weights used by the exponential integrator, exact linear evolution on
//! a periodic grid, and decay-rate fits against the `L^q` estimate.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::EquationParams;
use crate::quad::{integrate, QuadOptions};
use crate::spectral::{Grid, SpectralField};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    RealRoots,
    DoubleRoot,
    ComplexRoots,
}

/// Below this `|λ₁ − λ₂|·t` the divided differences are evaluated by series.
const SERIES_THRESHOLD: f64 = 1e-6;

/// `(|ξ|^{2δ}, |ξ|^{2σ})`, the damping and stiffness symbols.
fn symbols(xi: f64, p: &EquationParams) -> (f64, f64) {
    (xi.powf(2.0 * p.delta()), xi.powf(2.0 * p.sigma()))
}

fn classify(q: f64, disc: f64) -> Branch {
    if disc.abs() <= 1e-12 * (q * q).max(1.0) {
        Branch::DoubleRoot
    } else if disc > 0.0 {
        Branch::RealRoots
    } else {
        Branch::ComplexRoots
    }
}

/// Roots of `λ² + |ξ|^{2δ} λ + |ξ|^{2σ} = 0`, ordered with `Re λ₁ ≥ Re λ₂`
/// (`Im λ₁ > 0` for complex roots).
pub fn lambda12(xi_norm: f64, p: &EquationParams) -> (Complex64, Complex64, Branch) {
    let (q, s) = symbols(xi_norm, p);
    let disc = q * q - 4.0 * s;
    let m = -0.5 * q;
    let branch = classify(q, disc);
    match branch {
        Branch::DoubleRoot => (Complex64::new(m, 0.0), Complex64::new(m, 0.0), branch),
        Branch::RealRoots => {
            // λ₂ carries no cancellation; λ₁ follows from λ₁λ₂ = |ξ|^{2σ}.
            let l2 = -0.5 * (q + disc.sqrt());
            let l1 = if l2 == 0.0 { 0.0 } else { s / l2 };
            (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0), branch)
        }
        Branch::ComplexRoots => {
            let w = 0.5 * (-disc).sqrt();
            (Complex64::new(m, w), Complex64::new(m, -w), branch)
        }
    }
}

/// `K₀`, `K₁` and their time derivatives at a fixed `(t, |ξ|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValues {
    pub k0: f64,
    pub k1: f64,
    pub dk0: f64,
    pub dk1: f64,
}

impl KernelValues {
    pub fn determinant(&self) -> f64 {
        self.k0 * self.dk1 - self.k1 * self.dk0
    }
}

/// Kernel values from the mid-point form `λ₁,₂ = m ± h`:
/// `K₁ = e^{mt} sinh(ht)/h`, `K₀ = e^{mt}(cosh(ht) − m sinh(ht)/h)`,
/// `∂ₜK₁ = e^{mt}(cosh(ht) + m sinh(ht)/h)`, `∂ₜK₀ = −|ξ|^{2σ} K₁`.
pub fn kernel_values(t: f64, xi_norm: f64, p: &EquationParams) -> KernelValues {
    let (q, s) = symbols(xi_norm, p);
    kernel_from_symbols(t, q, s)
}

/// [`kernel_values`] from the symbols `q = |ξ|^{2δ}`, `s = |ξ|^{2σ}`.
fn kernel_from_symbols(t: f64, q: f64, s: f64) -> KernelValues {
    let disc = q * q - 4.0 * s;
    let m = -0.5 * q;
    let branch = classify(q, disc);
    let h_abs = 0.5 * disc.abs().sqrt();
    // (e^{mt} cosh, e^{mt} sinh/h) in the respective branch
    let (ec, es) = if branch == Branch::DoubleRoot || 2.0 * h_abs * t < SERIES_THRESHOLD {
        let x = if branch == Branch::DoubleRoot { 0.0 } else { 0.25 * disc * t * t };
        let c = 1.0 + x / 2.0 * (1.0 + x / 12.0 * (1.0 + x / 30.0));
        let sh = t * (1.0 + x / 6.0 * (1.0 + x / 20.0 * (1.0 + x / 42.0)));
        let e = (m * t).exp();
        (e * c, e * sh)
    } else if branch == Branch::ComplexRoots {
        let e = (m * t).exp();
        let wt = h_abs * t;
        (e * wt.cos(), e * wt.sin() / h_abs)
    } else if h_abs * t < 0.5 {
        let e = (m * t).exp();
        let ht = h_abs * t;
        (e * ht.cosh(), e * ht.sinh() / h_abs)
    } else {
        // Separated real roots: the exponential form avoids the cancellation
        // between cosh and m·sinh/h for stiff modes.
        let l2 = -0.5 * (q + disc.sqrt());
        let l1 = s / l2;
        let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
        let w = 2.0 * h_abs;
        return KernelValues {
            k0: (l1 * e2 - l2 * e1) / w,
            k1: (e1 - e2) / w,
            dk0: -s * (e1 - e2) / w,
            dk1: (l1 * e1 - l2 * e2) / w,
        };
    };
    KernelValues { k0: ec - m * es, k1: es, dk0: -s * es, dk1: ec + m * es }
}

/// Duhamel weights `A = ∫₀^dt K₁(r) dr` and `B = dt⁻¹ ∫₀^dt K₁(r)(dt − r) dr`.
///
/// Linear interpolation of the source between `t_n` and `t_{n+1}` gives the
/// increments `u += (A − B) g_n + B g_{n+1}` and `u_t += (K₁ − A/dt) g_n + (A/dt) g_{n+1}`.
pub fn duhamel_weights(dt: f64, xi_norm: f64, p: &EquationParams) -> (f64, f64) {
    let (q, s) = symbols(xi_norm, p);
    if (q + s.sqrt()) * dt <= 4.0 {
        // Taylor series of K₁ from K₁'' + q K₁' + s K₁ = 0, K₁(0) = 0, K₁'(0) = 1;
        // e_k = K₁^{(k)}(0) dt^k / k!.
        let (mut e_prev, mut e_cur) = (0.0, dt);
        let (mut a, mut b) = (0.0, 0.0);
        for k in 1..80 {
            let kf = k as f64;
            a += e_cur / (kf + 1.0);
            b += e_cur / ((kf + 1.0) * (kf + 2.0));
            let e_next = -q * dt * e_cur / (kf + 1.0) - s * dt * dt * e_prev / (kf * (kf + 1.0));
            e_prev = e_cur;
            e_cur = e_next;
            if e_cur.abs() < 1e-19 * dt && e_prev.abs() < 1e-19 * dt {
                break;
            }
        }
        return (dt * a, dt * b);
    }
    let (l1, l2, _) = lambda12(xi_norm, p);
    if (l1 - l2).norm() * dt >= 0.5 {
        // Divided differences of φ₁(λ dt) dt and φ₂(λ dt) dt.
        let (z1, z2) = (l1 * dt, l2 * dt);
        let a = dt * (phi(z1, 1) - phi(z2, 1)) / (z1 - z2) * dt;
        let b = dt * (phi(z1, 2) - phi(z2, 2)) / (z1 - z2) * dt;
        return (a.re, b.re);
    }
    // Stiff near-double root: direct quadrature of the stable kernel.
    let opts = QuadOptions::new(1e-300, 1e-14);
    let a = integrate(|r| kernel_values(r, xi_norm, p).k1, 0.0, dt, opts).value;
    let b = integrate(|r| kernel_values(r, xi_norm, p).k1 * (dt - r) / dt, 0.0, dt, opts).value;
    (a, b)
}

/// `φ_j(z) = Σ_k z^k/(k+j)!` for `j ∈ {1, 2}`.
fn phi(z: Complex64, j: u32) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(if j == 1 { 1.0 } else { 0.5 }, 0.0);
        let mut sum = term;
        for k in 1..30 {
            term = term * z / (k + j) as f64;
            sum += term;
        }
        return sum;
    }
    let ez = z.exp();
    if j == 1 {
        (ez - 1.0) / z
    } else {
        (ez - 1.0 - z) / (z * z)
    }
}

/// Per-mode propagator data at a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRecord {
    pub xi_norm: f64,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub branch: Branch,
    pub kernel: KernelValues,
    /// Duhamel weights `(A, B)` of [`duhamel_weights`].
    pub weights: (f64, f64),
}

/// Kernel values for every Fourier mode of a grid at step `dt`.
#[derive(Debug, Clone)]
pub struct PropagatorTable {
    params: EquationParams,
    dt: f64,
    modes: Vec<ModeRecord>,
}

impl PropagatorTable {
    pub fn build(p: &EquationParams, grid: &Grid, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        let modes: Vec<ModeRecord> = grid
            .xi_norms()
            .into_iter()
            .map(|xi| {
                let (lambda1, lambda2, branch) = lambda12(xi, p);
                ModeRecord {
                    xi_norm: xi,
                    lambda1,
                    lambda2,
                    branch,
                    kernel: kernel_values(dt, xi, p),
                    weights: duhamel_weights(dt, xi, p),
                }
            })
            .collect();
        if let Some(bad) = modes.iter().find(|r| r.lambda1.re > 0.0 || r.lambda2.re > 0.0) {
            return Err(Error::NumericalFailure {
                time: 0.0,
                message: format!("unstable root at |xi| = {}", bad.xi_norm),
            });
        }
        Ok(Self { params: *p, dt, modes })
    }

    pub fn params(&self) -> &EquationParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> &[ModeRecord] {
        &self.modes
    }

    /// Largest deviation of `det [[K₀, K₁], [∂ₜK₀, ∂ₜK₁]]` from `e^{−|ξ|^{2δ} dt}`,
    /// relative to the size of the products entering the determinant.
    pub fn wronskian_defect(&self) -> f64 {
        self.modes
            .iter()
            .map(|r| {
                let k = &r.kernel;
                let target = (-r.xi_norm.powf(2.0 * self.params.delta()) * self.dt).exp();
                let scale = target.max((k.k0 * k.dk1).abs() + (k.k1 * k.dk0).abs());
                (k.determinant() - target).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// One exact linear step applied to Fourier coefficients in place.
    pub fn advance_linear(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        for ((r, a), b) in self.modes.iter().zip(u.iter_mut()).zip(v.iter_mut()) {
            let k = &r.kernel;
            let (u0, v0) = (*a, *b);
            *a = u0 * k.k0 + v0 * k.k1;
            *b = u0 * k.dk0 + v0 * k.dk1;
        }
    }
}

/// Exact solution of the linear problem at time `t` on the periodic grid.
pub fn propagate_linear(
    u: &SpectralField,
    v: &SpectralField,
    t: f64,
    p: &EquationParams,
) -> Result<(SpectralField, SpectralField)> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("propagation time must be non-negative, got {t}")));
    }
    let grid = u.grid();
    let xi = grid.xi_norms();
    let mut uc = Vec::with_capacity(xi.len());
    let mut vc = Vec::with_capacity(xi.len());
    for ((x, a), b) in xi.iter().zip(u.coeffs()).zip(v.coeffs()) {
        let k = kernel_values(t, *x, p);
        uc.push(a * k.k0 + b * k.k1);
        vc.push(a * k.dk0 + b * k.dk1);
    }
    Ok((SpectralField::from_coeffs(grid, uc)?, SpectralField::from_coeffs(grid, vc)?))
}

/// Norm index of the decay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NormKind {
    Lq(f64),
    Infinity,
}

impl NormKind {
    fn inverse(self) -> f64 {
        match self {
            NormKind::Lq(q) => 1.0 / q,
            NormKind::Infinity => 0.0,
        }
    }

    /// Grid norm with the cell-volume quadrature weight.
    pub fn eval(self, values: &[f64], cell_volume: f64) -> f64 {
        match self {
            NormKind::Infinity => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormKind::Lq(q) => {
                let s: f64 = values.iter().map(|v| v.abs().powf(q)).sum();
                (s * cell_volume).powf(1.0 / q)
            }
        }
    }
}

/// Theoretical decay exponent `−(n − min{2δ, σ} − n/q)/κ` of `‖u(t)‖_{L^q}`.
pub fn decay_target(p: &EquationParams, q: NormKind) -> f64 {
    -(p.effective_dim() - p.dim() * q.inverse()) / p.kappa()
}

/// Zero-mode share allowed when `δ > 0`, where the mode `ξ = 0` grows linearly.
pub const ZERO_MODE_LIMIT: f64 = 1e-3;
/// Boundary mass fraction allowed when `δ = 0`.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConfig {
    pub q: NormKind,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Data `u₁ = e^{−|x|²/w²}` scaled to unit mass, `u₀ = 0`.
    pub width: f64,
    /// Grid override; chosen from `t_max` when absent.
    pub npts: Option<usize>,
    pub half_len: Option<f64>,
}

impl DecayConfig {
    pub fn new(q: NormKind, t_max: f64) -> Self {
        Self { q, t_min: 1.0, t_max, samples: 25, width: 2.0, npts: None, half_len: None }
    }

    /// Box half-length large enough that periodization stays below the limits:
    /// a multiple of the diffusive scale `t^{1/κ}` for `δ = 0`, and the
    /// zero-mode budget `t^{1 + (n − min{2δ,σ})/κ}` for `δ > 0`.
    fn box_half_len(&self, p: &EquationParams) -> f64 {
        if let Some(l) = self.half_len {
            return l;
        }
        let kappa = p.kappa();
        if p.delta() == 0.0 {
            12.0 * self.t_max.powf(1.0 / kappa) + 8.0 * self.width
        } else {
            let growth = self.t_max.powf(1.0 + p.effective_dim() / kappa);
            0.5 * (growth / (0.5 * ZERO_MODE_LIMIT)).powf(1.0 / p.dim()) + 8.0 * self.width
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub target: f64,
    pub r2: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Boundary mass fraction (`δ = 0`) or zero-mode share (`δ > 0`) at `t_max`.
    pub periodization: f64,
    pub npts: usize,
    pub half_len: f64,
}

impl DecayFit {
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.target) / self.target).abs()
    }
}

/// Fit the decay exponent of `‖u(t)‖_{L^q}` for the linear problem with unit
/// mass Gaussian `u₁` over the last decade of a geometric time grid.
pub fn measure_decay(p: &EquationParams, cfg: &DecayConfig) -> Result<DecayFit> {
    let n = p.n();
    if n > 2 {
        return Err(Error::InvalidParams(format!("decay fits need n in {{1, 2}}, got {n}")));
    }
    if !(cfg.t_min > 0.0 && cfg.t_max > cfg.t_min) || cfg.samples < 3 {
        return Err(Error::InvalidParams("decay time grid needs 0 < t_min < t_max and >= 3 samples".into()));
    }
    let half_len = cfg.box_half_len(p);
    let npts = match cfg.npts {
        Some(np) => np,
        None => {
            let want = (2.0 * half_len / (0.5 * cfg.width)).ceil() as usize;
            want.next_power_of_two().max(64)
        }
    };
    if npts.checked_pow(n as u32).is_none_or(|total| total > 1 << 24) {
        return Err(Error::InvalidParams(format!(
            "decay fit up to t = {} needs a {npts}-point grid per axis (box half-length {half_len:.3e}), above 2^24 points in total",
            cfg.t_max
        )));
    }
    let grid = Grid::new(n, npts, half_len)?;
    // Fourier coefficients of the sampled Gaussian, exact up to aliasing:
    // DFT_k ≈ ĥ(ξ_k)(−1)^{Σk}/dxⁿ with ĥ(ξ) = e^{−|ξ|²w²/4}.
    let signs: Vec<f64> = (0..npts).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let xi = grid.xi_norms();
    let sym: Vec<(f64, f64)> = xi.iter().map(|x| symbols(*x, p)).collect();
    let inv_cell = 1.0 / grid.cell_volume();
    let data: Vec<Complex64> = xi
        .iter()
        .enumerate()
        .map(|(idx, x)| {
            let sign = if n == 1 { signs[idx] } else { signs[idx / npts] * signs[idx % npts] };
            Complex64::new(sign * inv_cell * (-0.25 * x * x * cfg.width * cfg.width).exp(), 0.0)
        })
        .collect();
    let ratio = (cfg.t_max / cfg.t_min).powf(1.0 / (cfg.samples - 1) as f64);
    let times: Vec<f64> = (0..cfg.samples).map(|i| cfg.t_min * ratio.powi(i as i32)).collect();
    let mut norms = Vec::with_capacity(times.len());
    let mut periodization = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let mut c: Vec<Complex64> =
            sym.par_iter().zip(&data).map(|((q, s), d)| d * kernel_from_symbols(t, *q, *s).k1).collect();
        let zero_mode = c[0].re / grid.len() as f64;
        grid.inverse_in_place(&mut c);
        let values: Vec<f64> = c.iter().map(|z| z.re).collect();
        norms.push(cfg.q.eval(&values, grid.cell_volume()));
        if i + 1 == times.len() {
            periodization = if p.delta() == 0.0 {
                boundary_mass(&grid, &values)
            } else {
                zero_mode.abs() / NormKind::Infinity.eval(&values, 1.0)
            };
        }
    }
    let limit = if p.delta() == 0.0 { BOUNDARY_MASS_LIMIT } else { ZERO_MODE_LIMIT };
    if !(periodization <= limit) {
        return Err(Error::BoxTooSmall { fraction: periodization, limit });
    }
    let cutoff = cfg.t_max / 10.0 * (1.0 - 1e-9);
    let pts: Vec<(f64, f64)> =
        times.iter().zip(&norms).filter(|(t, _)| **t >= cutoff).map(|(t, v)| ((1.0 + t).ln(), v.ln())).collect();
    let fit = linear_fit(&pts)?;
    Ok(DecayFit {
        slope: fit.slope,
        target: decay_target(p, cfg.q),
        r2: fit.r2,
        times,
        norms,
        periodization,
        npts,
        half_len,
    })
}

/// Fraction of `∫|u|` carried by the outer tenth of the box along any axis.
pub fn boundary_mass(grid: &Grid, values: &[f64]) -> f64 {
    let edge = 0.9 * grid.half_len();
    let dim = grid.dim();
    let (mut outer, mut total) = (0.0, 0.0);
    for (idx, v) in values.iter().enumerate() {
        let pt = grid.point(idx);
        let a = v.abs();
        total += a;
        if pt[..dim].iter().any(|c| c.abs() > edge) {
            outer += a;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params(s: f64, d: f64) -> EquationParams {
        EquationParams::new(s, d, 1).unwrap()
    }

    /// Kernels from the root formulas in complex arithmetic.
    fn complex_kernels(t: f64, xi: f64, p: &EquationParams) -> (Complex64, Complex64) {
        let (l1, l2, _) = lambda12(xi, p);
        let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
        ((l1 * e2 - l2 * e1) / (l1 - l2), (e1 - e2) / (l1 - l2))
    }

    /// Classical RK4 for `y'' + q y' + s y = 0`.
    fn ode_oracle(q: f64, s: f64, y0: f64, v0: f64, t: f64, steps: usize) -> (f64, f64) {
        let h = t / steps as f64;
        let f = |y: f64, v: f64| (v, -q * v - s * y);
        let (mut y, mut v) = (y0, v0);
        for _ in 0..steps {
            let (a1, b1) = f(y, v);
            let (a2, b2) = f(y + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = f(y + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = f(y + h * a3, v + h * b3);
            y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        (y, v)
    }

    #[test]
    fn roots_for_the_damped_wave() {
        let p = params(1.0, 0.0);
        let (l1, l2, b) = lambda12(0.0, &p);
        assert_eq!(b, Branch::RealRoots);
        assert!((l1 - Complex64::new(0.0, 0.0)).norm() < 1e-15);
        assert!((l2 - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let (l1, l2, b) = lambda12(1.0, &p);
        assert_eq!(b, Branch::ComplexRoots);
        assert!((l1 - Complex64::new(-0.5, 0.75f64.sqrt())).norm() < 1e-15);
        assert!((l2 - Complex64::new(-0.5, -0.75f64.sqrt())).norm() < 1e-15);
        let (l1, l2, b) = lambda12(0.5, &p);
        assert_eq!(b, Branch::DoubleRoot);
        assert_eq!(l1, l2);
        assert!((l1.re + 0.5).abs() < 1e-15);
    }

    #[test]
    fn initial_values() {
        for (s, d) in [(1.0, 0.0), (1.5, 1.0), (2.0, 2.0)] {
            for xi in [0.0, 0.3, 1.0, 7.0] {
                let k = kernel_values(0.0, xi, &params(s, d));
                assert_eq!((k.k0, k.k1, k.dk0, k.dk1), (1.0, 0.0, 0.0, 1.0));
            }
        }
    }

    #[test]
    fn zero_mode_and_double_root_values() {
        let p = params(1.0, 0.0);
        let k = kernel_values(2.0, 0.0, &p);
        assert!((k.k1 - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        let k = kernel_values(1.0, 0.5, &p);
        assert!((k.k1 - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k.k0 - 1.5 * (-0.5f64).exp()).abs() < 1e-15);
        for xi in [0.5 - 1e-7, 0.5 + 1e-7] {
            assert!((kernel_values(1.0, xi, &p).k1 - (-0.5f64).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn real_part_of_complex_formulas() {
        for (s, d) in [(1.0, 0.0), (1.0, 0.25), (1.0, 0.5), (1.5, 1.0), (2.0, 2.0)] {
            let p = params(s, d);
            for xi in [0.05, 0.3, 0.9, 1.7, 3.0] {
                let t = 0.7;
                let (b, _, _) = lambda12(xi, &p);
                let (k0, k1) = complex_kernels(t, xi, &p);
                let k = kernel_values(t, xi, &p);
                let tol = 1e-10 * (1.0 + k0.norm() + k1.norm());
                assert!(k0.im.abs() < tol && k1.im.abs() < tol, "imaginary residue at {b:?}");
                assert!((k.k0 - k0.re).abs() < tol && (k.k1 - k1.re).abs() < tol, "xi {xi} ({s},{d})");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = params(1.5, 1.0);
        for xi in [0.2, 0.8, 1.3] {
            let h = 1e-5;
            let k = kernel_values(0.9, xi, &p);
            let kp = kernel_values(0.9 + h, xi, &p);
            let km = kernel_values(0.9 - h, xi, &p);
            assert!((k.dk0 - (kp.k0 - km.k0) / (2.0 * h)).abs() < 1e-8);
            assert!((k.dk1 - (kp.k1 - km.k1) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_ode_oracle() {
        for (s, d, xi) in [(1.0, 0.0, 1.0), (1.0, 0.25, 0.4), (2.0, 2.0, 1.2), (1.5, 1.0, 0.05)] {
            let p = params(s, d);
            let (q, st) = symbols(xi, &p);
            let k = kernel_values(1.0, xi, &p);
            let (y, v) = ode_oracle(q, st, 1.0, 0.0, 1.0, 20_000);
            assert!((k.k0 - y).abs() < 1e-10 && (k.dk0 - v).abs() < 1e-10);
            let (y, v) = ode_oracle(q, st, 0.0, 1.0, 1.0, 20_000);
            assert!((k.k1 - y).abs() < 1e-10 && (k.dk1 - v).abs() < 1e-10);
        }
    }

    #[test]
    fn stiff_real_roots_stay_finite() {
        let p = params(2.0, 2.0);
        let k = kernel_values(5.0, 10.0, &p);
        assert!(k.k0.is_finite() && k.k1.is_finite() && k.dk1.is_finite());
        assert!(k.k1 >= 0.0);
    }

    #[test]
    fn duhamel_weights_match_quadrature() {
        let opts = QuadOptions::new(1e-15, 1e-13);
        for (s, d) in [(1.0, 0.0), (1.0, 0.25), (1.5, 1.0), (2.0, 2.0)] {
            let p = params(s, d);
            for xi in [0.0, 0.01, 0.5, 2.0, 6.0] {
                for dt in [1e-3, 0.05, 0.4] {
                    let (a, b) = duhamel_weights(dt, xi, &p);
                    let qa = integrate(|r| kernel_values(r, xi, &p).k1, 0.0, dt, opts).value;
                    let qb = integrate(|r| kernel_values(r, xi, &p).k1 * (dt - r) / dt, 0.0, dt, opts).value;
                    assert!((a - qa).abs() <= 1e-11 * qa.abs().max(1e-12), "A xi {xi} dt {dt} ({s},{d}): {a} vs {qa}");
                    assert!((b - qb).abs() <= 1e-11 * qb.abs().max(1e-12), "B xi {xi} dt {dt} ({s},{d}): {b} vs {qb}");
                }
            }
        }
    }

    #[test]
    fn duhamel_weights_near_a_stiff_double_root() {
        let p = params(1.0, 1.0);
        let opts = QuadOptions::new(1e-300, 1e-13);
        for xi in [2.0, 2.0 + 1e-4, 2.05] {
            let dt = 1.5;
            let (a, b) = duhamel_weights(dt, xi, &p);
            let qa = integrate(|r| kernel_values(r, xi, &p).k1, 0.0, dt, opts).value;
            let qb = integrate(|r| kernel_values(r, xi, &p).k1 * (dt - r) / dt, 0.0, dt, opts).value;
            assert!((a - qa).abs() < 1e-12 * qa && (b - qb).abs() < 1e-12 * qb);
        }
    }

    #[test]
    fn table_wronskian_and_stability() {
        for (s, d) in [(1.0, 0.0), (1.0, 0.25), (1.0, 0.5), (1.5, 1.0), (2.0, 2.0)] {
            let grid = Grid::new(1, 1024, 40.0).unwrap();
            let table = PropagatorTable::build(&params(s, d), &grid, 0.05).unwrap();
            let w = table.wronskian_defect();
            assert!(w < 1e-10, "({s},{d}): {w}");
        }
        let grid = Grid::new(1, 64, 10.0).unwrap();
        assert!(PropagatorTable::build(&params(1.0, 0.0), &grid, 0.0).is_err());
    }

    #[test]
    fn single_mode_propagation() {
        let p = params(1.0, 0.0);
        let grid = Grid::new(1, 64, PI).unwrap();
        let u = SpectralField::from_fn(&grid, |x| x[0].sin());
        let v = SpectralField::from_fn(&grid, |_| 0.0);
        let (u1, _) = propagate_linear(&u, &v, 1.0, &p).unwrap();
        let (y, _) = ode_oracle(1.0, 1.0, 1.0, 0.0, 1.0, 20_000);
        for (idx, val) in u1.values().iter().enumerate() {
            assert!((val - y * grid.coord(idx).sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn propagation_semigroup_and_zero_data() {
        let p = params(1.5, 1.0);
        let grid = Grid::new(1, 128, 12.0).unwrap();
        let u = SpectralField::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let v = SpectralField::from_fn(&grid, |x| x[0] * (-0.5 * x[0] * x[0]).exp());
        let (a, b) = propagate_linear(&u, &v, 0.3, &p).unwrap();
        let (a, b) = propagate_linear(&a, &b, 0.9, &p).unwrap();
        let (c, d) = propagate_linear(&u, &v, 1.2, &p).unwrap();
        for (x, y) in a.values().iter().zip(c.values()).chain(b.values().iter().zip(d.values())) {
            assert!((x - y).abs() < 1e-10);
        }
        let z = SpectralField::from_fn(&grid, |_| 0.0);
        let (zu, zv) = propagate_linear(&z, &z, 3.0, &p).unwrap();
        assert_eq!(zu.max_abs() + zv.max_abs(), 0.0);
        let other = Grid::new(1, 64, 12.0).unwrap();
        let w = SpectralField::from_fn(&other, |_| 0.0);
        assert_eq!(propagate_linear(&u, &w, 1.0, &p).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn decay_targets() {
        assert_eq!(decay_target(&params(1.0, 0.0), NormKind::Infinity), -0.5);
        assert!((decay_target(&params(1.0, 0.25), NormKind::Infinity) + 1.0 / 3.0).abs() < 1e-15);
        assert!((decay_target(&params(1.0, 0.0), NormKind::Lq(2.0)) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn small_box_is_reported() {
        let mut cfg = DecayConfig::new(NormKind::Infinity, 100.0);
        cfg.half_len = Some(10.0);
        cfg.npts = Some(64);
        let err = measure_decay(&params(1.0, 0.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::BoxTooSmall { .. }));
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let err = measure_decay(&params(1.0, 0.25), &DecayConfig::new(NormKind::Infinity, 1000.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)), "{err}");
    }

    proptest! {
        #[test]
        fn wronskian_identity(s in 1.0f64..2.5, frac in 0.0f64..1.0, xi in 0.0f64..6.0, t in 0.0f64..3.0) {
            let p = params(s, frac * s);
            let k = kernel_values(t, xi, &p);
            let target = (-xi.powf(2.0 * p.delta()) * t).exp();
            let scale = target.max((k.k0 * k.dk1).abs() + (k.k1 * k.dk0).abs());
            prop_assert!((k.determinant() - target).abs() <= 1e-10 * scale);
        }

        #[test]
        fn roots_are_stable(s in 1.0f64..3.0, frac in 0.0f64..1.0, xi in 0.0f64..50.0) {
            let (l1, l2, _) = lambda12(xi, &params(s, frac * s));
            prop_assert!(l1.re <= 0.0 && l2.re <= 0.0);
        }

        #[test]
        fn k1_nonnegative_for_real_roots(s in 1.0f64..2.5, frac in 0.0f64..1.0, xi in 0.0f64..4.0, t in 0.0f64..20.0) {
            let p = params(s, frac * s);
            let (_, _, b) = lambda12(xi, &p);
            if b != Branch::ComplexRoots {
                prop_assert!(kernel_values(t, xi, &p).k1 >= 0.0);
            }
        }
    }
}
