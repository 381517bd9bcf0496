//! Lifespan sweeps over the data size and scaling fits of the results.

use rayon::prelude::*;
use serde::Serialize;

use super::{run_to_blowup, DataProfile, LifespanSample, RunStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::moduli::{predict_lifespan, LifespanConstants, Modulus};
use crate::params::EquationParams;
use crate::stats::linear_fit;

/// Box half-length `4·T^{1/κ} + r_data` for an expected lifespan `T`.
pub fn box_half_len(p: &EquationParams, t_expected: f64, data_radius: f64) -> f64 {
    4.0 * t_expected.max(1.0).powf(1.0 / p.kappa()) + data_radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub solver: SolverConfig,
    pub profile: DataProfile,
    pub constants: LifespanConstants,
    /// Grow the box per `ε` from the predicted (and then measured) lifespan.
    pub auto_box: bool,
    pub max_half_len: f64,
    /// Reruns allowed when the measured lifespan outgrows the box.
    pub regrow_passes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            profile: DataProfile::GaussianVelocity { width: 1.0 },
            constants: LifespanConstants::default(),
            auto_box: true,
            max_half_len: 4096.0,
            regrow_passes: 2,
        }
    }
}

fn run_one(p: &EquationParams, m: &Modulus, eps: f64, cfg: &SweepConfig) -> LifespanSample {
    let radius = cfg.profile.support_radius();
    let mut solver = cfg.solver;
    if cfg.auto_box {
        let basis = predict_lifespan(p, m, eps, &cfg.constants)
            .map(|pr| pr.t_upper())
            .ok()
            .filter(|t| t.is_finite())
            .unwrap_or(cfg.solver.t_max)
            .min(cfg.solver.t_max);
        solver.half_len = box_half_len(p, basis, radius).clamp(cfg.solver.half_len, cfg.max_half_len);
    }
    let mut passes = 0;
    loop {
        let sample = match run_to_blowup(p, m, eps, &cfg.profile, &solver, &cfg.constants) {
            Ok((_, s)) => s,
            Err(e) => {
                return LifespanSample {
                    epsilon: eps,
                    t_measured: f64::NAN,
                    t_threshold: f64::NAN,
                    blowup: false,
                    status: RunStatus::Inconclusive,
                    prediction: predict_lifespan(p, m, eps, &cfg.constants).ok(),
                    half_len: solver.half_len,
                    npts: solver.npts,
                    dt_final: f64::NAN,
                    dt_floor_hit: false,
                    amplification: (f64::NAN, f64::NAN),
                    error: Some(format!("{}: {e}", e.code())),
                }
            }
        };
        let needed = box_half_len(p, sample.t_measured, radius);
        if !cfg.auto_box
            || !sample.blowup
            || needed <= solver.half_len
            || solver.half_len >= cfg.max_half_len
            || passes >= cfg.regrow_passes
        {
            return sample;
        }
        solver.half_len = needed.min(cfg.max_half_len);
        passes += 1;
    }
}

/// Independent runs for every `ε` (largest first), in parallel on the current
/// rayon pool. Per-sample failures are recorded in [`LifespanSample::error`].
pub fn sweep_epsilon(
    p: &EquationParams,
    m: &Modulus,
    eps_list: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<LifespanSample>> {
    cfg.solver.validate()?;
    if eps_list.is_empty() {
        return Err(Error::InvalidParams("empty epsilon list".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParams("epsilon values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("epsilon list must be strictly decreasing".into()));
    }
    p.require_finite_pc()?;
    Ok(eps_list.par_iter().map(|&eps| run_one(p, m, eps, cfg)).collect())
}

/// True when measured lifespans never decrease as `ε` decreases.
pub fn is_non_increasing(samples: &[LifespanSample]) -> bool {
    let mut sorted: Vec<&LifespanSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    sorted.windows(2).all(|w| !(w[1].t_measured > w[0].t_measured))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `ln T` against `ln(1/ε)`.
    PowerLaw,
    /// `ln T` against `ε^{−exponent}`.
    LogLinear { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
}

/// Least squares of `(ε, T)` pairs in the coordinates of `model`; needs three
/// finite lifespans.
pub fn fit_scaling(samples: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(e, t)| *e > 0.0 && t.is_finite() && *t > 0.0)
        .map(|&(e, t)| {
            let x = match model {
                ScalingModel::PowerLaw => (1.0 / e).ln(),
                ScalingModel::LogLinear { exponent } => e.powf(-exponent),
            };
            (x, t.ln())
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("scaling fit needs three finite lifespans, got {}", pts.len())));
    }
    let fit = linear_fit(&pts)?;
    let residuals = pts.iter().map(|(x, y)| y - (fit.slope * x + fit.intercept)).collect();
    Ok(ScalingFit { slope: fit.slope, intercept: fit.intercept, r2: fit.r2, residuals })
}
