//! Pseudo-spectral exponential integrator for
//! `u_tt + (−Δ)^σ u + (−Δ)^δ u_t = |u|^{p_c} μ(|u|)` on a periodic box, with
//! blow-up detection and lifespan measurement.
//!
//! The linear part is propagated exactly by [`PropagatorTable`]; the Duhamel
//! integral of the source is approximated by linear interpolation in time
//! (predictor from `g(u_n)`, corrector from `g(u_n)` and `g(u*)`), which is
//! second order in `dt`.

mod sweep;

pub use sweep::{box_half_len, fit_scaling, is_non_increasing, sweep_epsilon, ScalingFit, ScalingModel, SweepConfig};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_values, PropagatorTable};
use crate::moduli::{predict_lifespan, DiniVerdict, LifespanConstants, LifespanPrediction, Modulus};
use crate::params::EquationParams;
use crate::spectral::Grid;
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Points per axis.
    pub npts: usize,
    /// Box half-length `L`; the box is `[−L, L)ⁿ`.
    pub half_len: f64,
    pub dt0: f64,
    pub dt_floor: f64,
    /// `‖u‖_∞` at which blow-up is declared.
    pub blowup_threshold: f64,
    /// Fraction of the Nyquist band kept in the source term (2/3 rule by default).
    pub dealias: f64,
    pub t_max: f64,
    /// Accepted steps between norm records.
    pub record_stride: usize,
    /// Records between field snapshots.
    pub snapshot_stride: usize,
    /// Largest accepted relative increase of `‖u‖_∞` per step.
    pub growth_limit: f64,
    /// Largest accepted relative predictor-corrector discrepancy.
    pub discrepancy_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            npts: 1024,
            half_len: 64.0,
            dt0: 0.05,
            dt_floor: 1e-10,
            blowup_threshold: 1e6,
            dealias: 2.0 / 3.0,
            t_max: 1e4,
            record_stride: 5,
            snapshot_stride: 4,
            growth_limit: 0.2,
            discrepancy_tol: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.dt0 > 0.0 && self.dt_floor > 0.0 && self.dt_floor < self.dt0) {
            return bad(format!("need 0 < dt_floor < dt0, got dt_floor = {}, dt0 = {}", self.dt_floor, self.dt0));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return bad(format!("dealias fraction must lie in (0, 1], got {}", self.dealias));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blow-up threshold must be positive".into());
        }
        if self.record_stride == 0 || self.snapshot_stride == 0 {
            return bad("record and snapshot strides must be >= 1".into());
        }
        if !(self.growth_limit > 0.0 && self.discrepancy_tol > 0.0) {
            return bad("growth limit and discrepancy tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.npts, self.half_len)
    }
}

/// Initial data shapes before multiplication by `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataProfile {
    /// `u₀ = 0`, `u₁ = N e^{−|x|²/w²}` with `∫ u₁ ⟨x⟩^{−q₀} dx = 1` on the grid.
    GaussianVelocity { width: f64 },
    /// `u₀ = N e^{−|x|²/w²}` normalized as above, `u₁ = 0`.
    GaussianDisplacement { width: f64 },
    /// Spatially constant data carried by the zero mode.
    Constant { u0: f64, u1: f64 },
}

impl DataProfile {
    /// Parse `gaussian-u1:<w>`, `gaussian-u0:<w>` or `constant:<u0>:<u1>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParams(format!("bad number '{s}' in data profile '{spec}'")))
        };
        let profile = match parts.as_slice() {
            ["gaussian-u1", w] => DataProfile::GaussianVelocity { width: num(w)? },
            ["gaussian-u0", w] => DataProfile::GaussianDisplacement { width: num(w)? },
            ["constant", a, b] => DataProfile::Constant { u0: num(a)?, u1: num(b)? },
            _ => {
                return Err(Error::InvalidParams(format!(
                    "unknown data profile '{spec}' (expected gaussian-u1:<w>, gaussian-u0:<w> or constant:<u0>:<u1>)"
                )))
            }
        };
        match profile {
            DataProfile::GaussianVelocity { width } | DataProfile::GaussianDisplacement { width }
                if !(width > 0.0 && width.is_finite()) =>
            {
                Err(Error::InvalidParams(format!("profile width must be positive, got {width}")))
            }
            _ => Ok(profile),
        }
    }

    /// Radius beyond which the profile is below rounding.
    pub fn support_radius(&self) -> f64 {
        match self {
            DataProfile::GaussianVelocity { width } | DataProfile::GaussianDisplacement { width } => 6.0 * width,
            DataProfile::Constant { .. } => 0.0,
        }
    }

    /// `(u₀, u₁)` sampled on the grid.
    pub fn sample(&self, grid: &Grid, q0: f64) -> (Vec<f64>, Vec<f64>) {
        let len = grid.len();
        match *self {
            DataProfile::Constant { u0, u1 } => (vec![u0; len], vec![u1; len]),
            DataProfile::GaussianVelocity { width } | DataProfile::GaussianDisplacement { width } => {
                let shape = grid.sample(|x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    (-r2 / (width * width)).exp()
                });
                let weighted: f64 = shape
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (1.0 + grid.radius(i).powi(2)).powf(-0.5 * q0))
                    .sum::<f64>()
                    * grid.cell_volume();
                let f: Vec<f64> = shape.iter().map(|v| v / weighted).collect();
                if matches!(self, DataProfile::GaussianVelocity { .. }) {
                    (vec![0.0; len], f)
                } else {
                    (f, vec![0.0; len])
                }
            }
        }
    }
}

/// `g(u) = |u|^{p_c} μ(|u|)`, or the zero source.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    p_c: f64,
    modulus: Option<Modulus>,
}

impl Nonlinearity {
    pub fn new(p: &EquationParams, m: &Modulus) -> Result<Self> {
        Ok(Self { p_c: p.require_finite_pc()?, modulus: Some(m.clone()) })
    }

    /// `μ ≡ 0`.
    pub fn zero() -> Self {
        Self { p_c: 1.0, modulus: None }
    }

    pub fn is_zero(&self) -> bool {
        self.modulus.is_none()
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let Some(m) = &self.modulus else { return 0.0 };
        let a = u.abs();
        if a == 0.0 {
            return 0.0;
        }
        let v = a.powf(self.p_c) * m.mu_unchecked(a);
        if v.is_nan() {
            0.0
        } else {
            v
        }
    }

    /// `d ln g / d ln |u|` at `τ`, the power governing the blow-up profile.
    pub fn effective_power(&self, tau: f64) -> f64 {
        match &self.modulus {
            Some(m) => self.p_c + m.log_derivative(tau),
            None => 1.0,
        }
    }
}

/// Solver state: Fourier coefficients of `(u, u_t)`, the physical `u`, and the
/// dealiased transform of `g(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub u: Vec<f64>,
    pub g_hat: Vec<Complex64>,
}

impl State {
    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    /// `‖u_{n+1} − u*‖_∞`, the predictor-corrector gap.
    pub discrepancy: f64,
}

/// Exponential integrator on a fixed grid with a cache of propagator tables for
/// the step sizes `dt0 / 2^level`.
pub struct Solver {
    grid: Grid,
    params: EquationParams,
    nl: Nonlinearity,
    mask: Vec<f64>,
    dt0: f64,
    tables: Vec<Option<PropagatorTable>>,
}

impl Solver {
    pub fn new(p: &EquationParams, nl: Nonlinearity, grid: Grid, dt0: f64, dealias: f64) -> Result<Self> {
        if p.n() != grid.dim() {
            return Err(Error::InvalidParams(format!("grid dimension {} does not match n = {}", grid.dim(), p.n())));
        }
        let n = grid.npts() as i64;
        let keep: Vec<bool> = (0..n)
            .map(|k| {
                let ks = if k < n / 2 { k } else { k - n };
                dealias >= 1.0 || (ks.abs() as f64) < dealias * (n / 2) as f64
            })
            .collect();
        let mask: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let kept = if grid.dim() == 1 { keep[idx] } else { keep[idx / grid.npts()] && keep[idx % grid.npts()] };
                if kept {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { grid, params: *p, nl, mask, dt0, tables: Vec::new() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self, level: u32) -> f64 {
        self.dt0 / 2f64.powi(level as i32)
    }

    fn source_hat(&self, u: &[f64]) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = u.iter().map(|&v| Complex64::new(self.nl.eval(v), 0.0)).collect();
        self.grid.forward_in_place(&mut g);
        for (c, m) in g.iter_mut().zip(&self.mask) {
            *c *= *m;
        }
        g
    }

    pub fn init(&self, u0: &[f64], u1: &[f64]) -> Result<State> {
        if u0.len() != self.grid.len() || u1.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(State {
            t: 0.0,
            u_hat: self.grid.forward(u0),
            v_hat: self.grid.forward(u1),
            u: u0.to_vec(),
            g_hat: self.source_hat(u0),
        })
    }

    pub fn table(&mut self, level: u32) -> Result<&PropagatorTable> {
        let idx = level as usize;
        if self.tables.len() <= idx {
            self.tables.resize(idx + 1, None);
        }
        if self.tables[idx].is_none() {
            let dt = self.dt(level);
            self.tables[idx] = Some(PropagatorTable::build(&self.params, &self.grid, dt)?);
        }
        Ok(self.tables[idx].as_ref().expect("just built"))
    }

    /// One step of size `dt0 / 2^level`.
    pub fn step(&mut self, state: &State, level: u32) -> Result<StepOutcome> {
        self.table(level)?;
        let table = self.tables[level as usize].as_ref().expect("built above");
        let dt = table.dt();
        let len = self.grid.len();
        let mut lin_u = Vec::with_capacity(len);
        let mut lin_v = Vec::with_capacity(len);
        let mut pred_u = Vec::with_capacity(len);
        let mut pred_v = Vec::with_capacity(len);
        for (i, r) in table.modes().iter().enumerate() {
            let k = &r.kernel;
            let (a, _) = r.weights;
            let (u, v, g) = (state.u_hat[i], state.v_hat[i], state.g_hat[i]);
            let lu = u * k.k0 + v * k.k1;
            let lv = u * k.dk0 + v * k.dk1;
            lin_u.push(lu);
            lin_v.push(lv);
            pred_u.push(lu + g * a);
            pred_v.push(lv + g * k.k1);
        }
        let mut u_star = pred_u.clone();
        self.grid.inverse_in_place(&mut u_star);
        let u_star: Vec<f64> = u_star.iter().map(|c| c.re).collect();
        let g_star = if self.nl.is_zero() { vec![Complex64::new(0.0, 0.0); len] } else { self.source_hat(&u_star) };
        let mut new_u = Vec::with_capacity(len);
        let mut new_v = Vec::with_capacity(len);
        for (i, r) in table.modes().iter().enumerate() {
            let (a, b) = r.weights;
            let (g0, g1) = (state.g_hat[i], g_star[i]);
            new_u.push(lin_u[i] + g0 * (a - b) + g1 * b);
            new_v.push(lin_v[i] + g0 * (r.kernel.k1 - a / dt) + g1 * (a / dt));
        }
        let mut phys = new_u.clone();
        self.grid.inverse_in_place(&mut phys);
        let u: Vec<f64> = phys.iter().map(|c| c.re).collect();
        let discrepancy = u.iter().zip(&u_star).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let g_hat = if self.nl.is_zero() { vec![Complex64::new(0.0, 0.0); len] } else { self.source_hat(&u) };
        Ok(StepOutcome { state: State { t: state.t + dt, u_hat: new_u, v_hat: new_v, u, g_hat }, discrepancy })
    }
}

/// Norms at one record time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub dt: f64,
    pub l_pc: f64,
    pub l_inf: f64,
    pub l2: f64,
    /// `(1+t)^{1/p_c} ‖u‖_{L^{p_c}}`
    pub weighted_pc: f64,
    /// `(1+t)^{(n − min{2δ,σ})/κ} ‖u‖_{L^∞}`
    pub weighted_inf: f64,
    /// `‖u_lin‖_∞` of the linear solution with the same data.
    pub linear_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub npts: usize,
    pub half_len: f64,
    pub records: Vec<NormRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryRecord {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.npts, self.half_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    BlowUp,
    /// `t_max` reached with bounded weighted norms.
    Global,
    /// `t_max` reached while the nonlinear amplification keeps growing.
    InconclusiveGrowing,
    Inconclusive,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::BlowUp => "blow-up",
            RunStatus::Global => "global",
            RunStatus::InconclusiveGrowing => "inconclusive-growing",
            RunStatus::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Raw outcome of an integration before classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub trajectory: TrajectoryRecord,
    pub blowup: bool,
    /// Extrapolated blow-up time, `+∞` without blow-up.
    pub t_blowup: f64,
    /// First time `‖u‖_∞ ≥ M`.
    pub t_threshold: f64,
    pub t_final: f64,
    pub dt_final: f64,
    pub dt_floor_hit: bool,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanSample {
    pub epsilon: f64,
    /// Extrapolated lifespan; `+∞` when no blow-up was observed.
    pub t_measured: f64,
    pub t_threshold: f64,
    pub blowup: bool,
    pub status: RunStatus,
    pub prediction: Option<LifespanPrediction>,
    pub half_len: f64,
    pub npts: usize,
    pub dt_final: f64,
    pub dt_floor_hit: bool,
    /// `‖u‖_∞/‖u_lin‖_∞` at the end and at half the final time.
    pub amplification: (f64, f64),
    pub error: Option<String>,
}

/// Integrate from `ε·(u₀, u₁)` until `‖u‖_∞ ≥ M` or `t_max`.
pub fn simulate(
    p: &EquationParams,
    nl: &Nonlinearity,
    eps: f64,
    profile: &DataProfile,
    cfg: &SolverConfig,
) -> Result<Simulation> {
    cfg.validate()?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("epsilon must be non-negative, got {eps}")));
    }
    let grid = cfg.grid(p.n())?;
    let (_, q0) = p.s0_q0();
    let (mut d0, mut d1) = profile.sample(&grid, q0);
    d0.iter_mut().chain(d1.iter_mut()).for_each(|v| *v *= eps);
    let scale = d0.iter().chain(&d1).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale >= cfg.blowup_threshold {
        return Err(Error::InvalidParams(format!(
            "blow-up threshold {} must exceed the initial data size {scale}",
            cfg.blowup_threshold
        )));
    }
    let mut solver = Solver::new(p, nl.clone(), grid.clone(), cfg.dt0, cfg.dealias)?;
    let mut state = solver.init(&d0, &d1)?;
    let (p_c, weight_inf) = (p.critical_exponent().finite().unwrap_or(f64::INFINITY), p.effective_dim() / p.kappa());
    let xi = grid.xi_norms();
    let data_hat = (grid.forward(&d0), grid.forward(&d1));
    let record = |s: &State, dt: f64| -> NormRecord {
        let cell = grid.cell_volume();
        let l_inf = s.max_abs();
        let l2 = (s.u.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
        let l_pc = if p_c.is_finite() {
            (s.u.iter().map(|v| v.abs().powf(p_c)).sum::<f64>() * cell).powf(1.0 / p_c)
        } else {
            l_inf
        };
        let mut lin: Vec<Complex64> = xi
            .iter()
            .zip(data_hat.0.iter().zip(&data_hat.1))
            .map(|(x, (a, b))| {
                let k = kernel_values(s.t, *x, p);
                a * k.k0 + b * k.k1
            })
            .collect();
        grid.inverse_in_place(&mut lin);
        let linear_inf = lin.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
        NormRecord {
            t: s.t,
            dt,
            l_pc,
            l_inf,
            l2,
            weighted_pc: (1.0 + s.t).powf(1.0 / p_c) * l_pc,
            weighted_inf: (1.0 + s.t).powf(weight_inf) * l_inf,
            linear_inf,
        }
    };
    let mut traj = TrajectoryRecord {
        dim: grid.dim(),
        npts: grid.npts(),
        half_len: grid.half_len(),
        records: vec![record(&state, cfg.dt0)],
        snapshots: vec![Snapshot { t: 0.0, values: state.u.clone() }],
    };
    let mut sim = Simulation {
        trajectory: TrajectoryRecord { records: Vec::new(), snapshots: Vec::new(), ..traj.clone() },
        blowup: false,
        t_blowup: f64::INFINITY,
        t_threshold: f64::INFINITY,
        t_final: 0.0,
        dt_final: cfg.dt0,
        dt_floor_hit: false,
        steps: 0,
        rejected: 0,
    };
    if scale == 0.0 {
        sim.trajectory = traj;
        return Ok(sim);
    }
    let floor = scale;
    let mut level = 0u32;
    let mut calm = 0usize;
    let mut history: Vec<(f64, f64)> = vec![(0.0, state.max_abs())];
    let mut since_record = 0usize;
    let mut records_since_snapshot = 0usize;
    while state.t < cfg.t_max {
        let old = state.max_abs();
        let out = solver.step(&state, level)?;
        let new = out.state.max_abs();
        let finite = out.state.u.iter().all(|v| v.is_finite());
        let growth = (new - old) / old.max(floor);
        let disc = out.discrepancy / new.max(floor);
        let ok = finite && growth <= cfg.growth_limit && disc <= cfg.discrepancy_tol;
        if !ok && solver.dt(level + 1) >= cfg.dt_floor {
            level += 1;
            calm = 0;
            sim.rejected += 1;
            continue;
        }
        if !finite {
            if old >= cfg.blowup_threshold.sqrt() {
                sim.blowup = true;
                sim.t_threshold = state.t;
                break;
            }
            return Err(Error::NumericalFailure {
                time: state.t,
                message: format!("non-finite solution at dt = {:.3e}", solver.dt(level)),
            });
        }
        if !ok {
            sim.dt_floor_hit = true;
        }
        state = out.state;
        sim.steps += 1;
        history.push((state.t, new));
        if history.len() > 16 {
            history.remove(0);
        }
        since_record += 1;
        let done = new >= cfg.blowup_threshold || state.t >= cfg.t_max;
        if since_record >= cfg.record_stride || done {
            since_record = 0;
            traj.records.push(record(&state, solver.dt(level)));
            records_since_snapshot += 1;
            if records_since_snapshot >= cfg.snapshot_stride || done {
                records_since_snapshot = 0;
                traj.snapshots.push(Snapshot { t: state.t, values: state.u.clone() });
            }
        }
        if new >= cfg.blowup_threshold {
            sim.blowup = true;
            sim.t_threshold = state.t;
            break;
        }
        if growth < 0.25 * cfg.growth_limit && disc < 0.25 * cfg.discrepancy_tol {
            calm += 1;
            if calm >= 25 && level > 0 {
                level -= 1;
                calm = 0;
            }
        } else {
            calm = 0;
        }
    }
    sim.t_final = state.t;
    sim.dt_final = solver.dt(level);
    if sim.blowup {
        sim.t_blowup = extrapolate_blowup(&history, nl);
    }
    sim.trajectory = traj;
    Ok(sim)
}

/// Fit `‖u‖_∞ ≈ A(T − t)^{−2/(p−1)}` to the last ten samples, with `p` the
/// effective power of `g` at the final amplitude, and return `T`.
pub fn extrapolate_blowup(history: &[(f64, f64)], nl: &Nonlinearity) -> f64 {
    let tail = &history[history.len().saturating_sub(10)..];
    let Some(&(t_last, u_last)) = tail.last() else { return f64::INFINITY };
    let p_eff = nl.effective_power(u_last);
    if !(p_eff > 1.0) || tail.len() < 3 {
        return t_last;
    }
    let beta = 2.0 / (p_eff - 1.0);
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, u)| (t, u.powf(-1.0 / beta))).collect();
    match linear_fit(&pts) {
        Ok(fit) if fit.slope < 0.0 => {
            let t_star = -fit.intercept / fit.slope;
            if t_star.is_finite() && t_star >= t_last {
                t_star
            } else {
                t_last
            }
        }
        _ => t_last,
    }
}

/// Weighted norms stay bounded when their maximum over the second half of the
/// run does not exceed 1.5 times the maximum over the first half.
fn weighted_bounded(records: &[NormRecord], t_end: f64) -> bool {
    let half = 0.5 * t_end;
    let max_of = |pred: &dyn Fn(&NormRecord) -> bool, f: &dyn Fn(&NormRecord) -> f64| {
        records.iter().filter(|r| pred(r)).map(f).fold(0.0, f64::max)
    };
    let fields: [fn(&NormRecord) -> f64; 2] = [|r| r.weighted_pc, |r| r.weighted_inf];
    fields.iter().all(|f| {
        let early = max_of(&|r| r.t <= half, f);
        let late = max_of(&|r| r.t > half, f);
        late.is_finite() && late <= 1.5 * early
    })
}

/// `‖u‖_∞/‖u_lin‖_∞` at the last record and at the record closest to half the final time.
fn amplification(records: &[NormRecord]) -> (f64, f64) {
    let ratio = |r: &NormRecord| if r.linear_inf > 0.0 { r.l_inf / r.linear_inf } else { 1.0 };
    let Some(last) = records.last() else { return (1.0, 1.0) };
    let mid = records
        .iter()
        .min_by(|a, b| (a.t - 0.5 * last.t).abs().total_cmp(&(b.t - 0.5 * last.t).abs()))
        .expect("non-empty");
    (ratio(last), ratio(mid))
}

/// Integrate and classify the run.
///
/// Reaching `t_max` yields `Global` only for Dini moduli with bounded weighted
/// norms; non-Dini runs that survive are reported as inconclusive, with
/// `InconclusiveGrowing` when the amplification over the linear solution is
/// still increasing.
pub fn run_to_blowup(
    p: &EquationParams,
    m: &Modulus,
    eps: f64,
    profile: &DataProfile,
    cfg: &SolverConfig,
    constants: &LifespanConstants,
) -> Result<(TrajectoryRecord, LifespanSample)> {
    let nl = Nonlinearity::new(p, m)?;
    let sim = simulate(p, &nl, eps, profile, cfg)?;
    let amp = amplification(&sim.trajectory.records);
    let status = if sim.blowup {
        RunStatus::BlowUp
    } else if eps == 0.0 {
        RunStatus::Global
    } else {
        let bounded = weighted_bounded(&sim.trajectory.records, sim.t_final);
        let growing = amp.0 > amp.1 || !bounded;
        match m.dini_classify().verdict {
            DiniVerdict::Dini if bounded => RunStatus::Global,
            _ if growing => RunStatus::InconclusiveGrowing,
            _ => RunStatus::Inconclusive,
        }
    };
    let prediction = if eps > 0.0 { predict_lifespan(p, m, eps, constants).ok() } else { None };
    let sample = LifespanSample {
        epsilon: eps,
        t_measured: sim.t_blowup,
        t_threshold: sim.t_threshold,
        blowup: sim.blowup,
        status,
        prediction,
        half_len: cfg.half_len,
        npts: cfg.npts,
        dt_final: sim.dt_final,
        dt_floor_hit: sim.dt_floor_hit,
        amplification: amp,
        error: None,
    };
    Ok((sim.trajectory, sample))
}
