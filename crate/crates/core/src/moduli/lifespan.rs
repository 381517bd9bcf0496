//! Lifespan predictions `T_ε` built from `H⁻¹`, plus calibration of the free
//! constants against measured lifespans.
//!
//! Every prediction is carried as `ln T` so that super-exponential lifespans
//! stay representable.

use serde::Serialize;

use super::{DiniVerdict, Modulus, ModulusKind};
use crate::error::{Error, Result};
use crate::params::EquationParams;

/// Free constants of the lower (`k1, k2, k`) and upper (`*_tilde`) bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifespanConstants {
    pub k1: f64,
    pub k2: f64,
    pub k: f64,
    pub k1_tilde: f64,
    pub k2_tilde: f64,
    pub k_tilde: f64,
}

impl Default for LifespanConstants {
    fn default() -> Self {
        Self { k1: 1.0, k2: 1.0, k: 1.0, k1_tilde: 1.0, k2_tilde: 1.0, k_tilde: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanPrediction {
    pub epsilon: f64,
    /// Dini modulus: the solution is global and every `ln T` is `+∞`.
    pub global_existence: bool,
    pub log_t_lower: f64,
    pub log_t_upper: f64,
    /// Lower-bound constants with the `H(k₂ε)` term dropped.
    pub log_t_simplified: f64,
    /// Leading-order closed form for the catalogue variants.
    pub closed_form_log_t: Option<f64>,
    pub formula_id: &'static str,
    pub constants: LifespanConstants,
}

impl LifespanPrediction {
    pub fn t_lower(&self) -> f64 {
        self.log_t_lower.exp()
    }

    pub fn t_upper(&self) -> f64 {
        self.log_t_upper.exp()
    }
}

struct Exponents {
    /// `κ/(n − min{2δ,σ})`
    time: f64,
    /// `2σ/(n − min{2δ,σ})`
    data: f64,
}

fn exponents(p: &EquationParams) -> Result<Exponents> {
    p.require_finite_pc()?;
    let d = p.effective_dim();
    Ok(Exponents { time: p.kappa() / d, data: 2.0 * p.sigma() / d })
}

/// `ln K + (κ/d)(ln ε + ln(1/H⁻¹(k₁ ε^{−2σ/d} + H(k₂ε))))`
fn log_t(m: &Modulus, e: &Exponents, eps: f64, k1: f64, k2: Option<f64>, k: f64) -> Result<f64> {
    let mut omega = k1 * eps.powf(-e.data);
    if let Some(k2) = k2 {
        omega += m.h(k2 * eps)?;
    }
    // Past the f64 range even in log form the lifespan is reported as ln T = +∞.
    if omega == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let z = match m.hinv_log(omega) {
        Err(Error::Underflow { .. }) => f64::INFINITY,
        other => other?,
    };
    Ok(k.ln() + e.time * (eps.ln() + z))
}

/// `exp` applied `times` times.
fn iterate_exp(mut x: f64, times: u32) -> f64 {
    for _ in 0..times {
        x = x.exp();
    }
    x
}

fn closed_form(m: &Modulus, e: &Exponents, eps: f64, k1: f64) -> (Option<f64>, &'static str) {
    let lead = e.time * eps.ln();
    let y = eps.powf(-e.data);
    match m.kind() {
        ModulusKind::PowerLaw { a } if *a < 0.0 => (Some(lead - e.time / a * (-a * k1 * y).ln()), "power-law"),
        ModulusKind::PowerLaw { .. } => (None, "general"),
        ModulusKind::ConstantOne => (Some(lead + e.time * k1 * y), "constant-one"),
        ModulusKind::LogPower { gamma } if *gamma < 1.0 => {
            let c = e.time * ((1.0 - gamma) * k1).powf(1.0 / (1.0 - gamma));
            (Some(lead + c * eps.powf(-e.data / (1.0 - gamma))), "log-power")
        }
        ModulusKind::LogPower { .. } => (Some(lead + e.time * (1.0 / eps).ln() * (k1 * y).exp()), "log-power-critical"),
        ModulusKind::IterLogPower { k, gamma } if *gamma < 1.0 => {
            let c = ((1.0 - gamma) * k1).powf(1.0 / (1.0 - gamma));
            let inner = c * eps.powf(-e.data / (1.0 - gamma));
            (Some(lead + e.time * iterate_exp(inner, k - 1)), "iter-log-power")
        }
        ModulusKind::IterLogPower { k, .. } => {
            let mut lk = (1.0 / eps).ln();
            for _ in 1..*k {
                lk = lk.ln();
            }
            let inner = lk * (k1 * y).exp();
            (Some(lead + e.time * iterate_exp(inner, k - 1)), "iter-log-power-critical")
        }
        ModulusKind::Tabulated { .. } => (None, "general"),
    }
}

/// Lower and upper lifespan bounds for data of size `eps`.
///
/// Dini moduli yield the global-existence variant. Tabulated moduli with an
/// indeterminate Dini verdict are evaluated like non-Dini ones.
pub fn predict_lifespan(
    p: &EquationParams,
    m: &Modulus,
    eps: f64,
    c: &LifespanConstants,
) -> Result<LifespanPrediction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {eps}")));
    }
    let e = exponents(p)?;
    if m.dini_classify().verdict == DiniVerdict::Dini {
        return Ok(LifespanPrediction {
            epsilon: eps,
            global_existence: true,
            log_t_lower: f64::INFINITY,
            log_t_upper: f64::INFINITY,
            log_t_simplified: f64::INFINITY,
            closed_form_log_t: None,
            formula_id: "global-existence",
            constants: *c,
        });
    }
    let log_t_lower = log_t(m, &e, eps, c.k1, Some(c.k2), c.k)?;
    let log_t_upper = log_t(m, &e, eps, c.k1_tilde, Some(c.k2_tilde), c.k_tilde)?;
    let log_t_simplified = log_t(m, &e, eps, c.k1, None, c.k)?;
    let (closed_form_log_t, formula_id) = closed_form(m, &e, eps, c.k1);
    Ok(LifespanPrediction {
        epsilon: eps,
        global_existence: false,
        log_t_lower,
        log_t_upper,
        log_t_simplified,
        closed_form_log_t,
        formula_id,
        constants: *c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub constants: LifespanConstants,
    /// RMS of `ln T_measured − ln T_predicted` after the best constant offset.
    pub rms_log_residual: f64,
}

/// Fit `k1` (with `k2 = 1`) by least squares on `ln T`, then choose `K` and `K̃`
/// as the smallest and largest multiplicative offsets so that every measured
/// lifespan sits between the two bounds.
pub fn calibrate_constants(p: &EquationParams, m: &Modulus, samples: &[(f64, f64)]) -> Result<Calibration> {
    let data: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(eps, t)| *eps > 0.0 && t.is_finite() && *t > 0.0)
        .map(|&(eps, t)| (eps, t.ln()))
        .collect();
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!("calibration needs two finite lifespans, got {}", data.len())));
    }
    let e = exponents(p)?;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for i in 0..=240 {
        let k1 = 10f64.powf(-3.0 + 6.0 * i as f64 / 240.0);
        let residuals: Option<Vec<f64>> =
            data.iter().map(|&(eps, lt)| log_t(m, &e, eps, k1, Some(1.0), 1.0).ok().map(|pred| lt - pred)).collect();
        let Some(r) = residuals else { continue };
        if r.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sse: f64 = r.iter().map(|v| (v - mean).powi(2)).sum();
        if best.as_ref().is_none_or(|b| sse < b.1) {
            best = Some((k1, sse, r));
        }
    }
    let (k1, sse, r) = best
        .ok_or_else(|| Error::InsufficientData("no calibration constant reproduces the measured lifespans".into()))?;
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Calibration {
        constants: LifespanConstants { k1, k2: 1.0, k: lo.exp(), k1_tilde: k1, k2_tilde: 1.0, k_tilde: hi.exp() },
        rms_log_residual: (sse / r.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped_wave() -> EquationParams {
        EquationParams::new(1.0, 0.0, 1).unwrap()
    }

    #[test]
    fn subcritical_power_example() {
        // H(τ) = 1/τ − e, so H⁻¹(ε⁻² + H(ε)) = ε²/(1 + ε) and T = ε⁻²(1 + ε)².
        let m = Modulus::power_law(-1.0).unwrap();
        let pred = predict_lifespan(&damped_wave(), &m, 0.1, &LifespanConstants::default()).unwrap();
        let expect = (1.1f64 / 0.1).powi(2);
        assert!((pred.t_lower() - expect).abs() < 1e-9 * expect);
        assert_eq!(pred.log_t_lower, pred.log_t_upper);
        assert_eq!(pred.formula_id, "power-law");
    }

    #[test]
    fn power_law_scaling_slope() {
        let m = Modulus::power_law(-1.0).unwrap();
        let p = damped_wave();
        let c = LifespanConstants::default();
        let pts: Vec<(f64, f64)> = (0..21)
            .map(|i| {
                let eps = 10f64.powf(-3.0 + 2.0 * i as f64 / 20.0);
                ((1.0 / eps).ln(), predict_lifespan(&p, &m, eps, &c).unwrap().log_t_lower)
            })
            .collect();
        let slope = crate::stats::linear_fit(&pts).unwrap().slope;
        // κ(p − 1)/((n − min{2δ,σ})(p_c − p)) = 2
        assert!((slope - 2.0).abs() < 0.04, "slope {slope}");
    }

    #[test]
    fn critical_constant_one() {
        let m = Modulus::constant_one();
        let p = damped_wave();
        for &eps in &[0.5, 0.1, 0.05] {
            let pred = predict_lifespan(&p, &m, eps, &LifespanConstants::default()).unwrap();
            // z = z₀ + ε⁻² + (ln 1/ε − z₀) = ε⁻² + ln(1/ε) exactly, so ln T = 2ε⁻².
            assert!((pred.log_t_lower - 2.0 / (eps * eps)).abs() < 1e-9 / (eps * eps));
        }
    }

    #[test]
    fn log_power_closed_form() {
        let m = Modulus::log_power(0.5).unwrap();
        let p = damped_wave();
        for &eps in &[0.1, 0.03, 0.01] {
            let pred = predict_lifespan(&p, &m, eps, &LifespanConstants::default()).unwrap();
            let cf = pred.closed_form_log_t.unwrap();
            let rel = (pred.log_t_simplified - cf).abs() / cf;
            assert!(rel < 0.05, "eps {eps}: {} vs {cf}", pred.log_t_simplified);
        }
    }

    #[test]
    fn log_power_critical_closed_form_is_exact() {
        let m = Modulus::log_power(1.0).unwrap();
        let pred = predict_lifespan(&damped_wave(), &m, 0.3, &LifespanConstants::default()).unwrap();
        let cf = pred.closed_form_log_t.unwrap();
        assert!((pred.log_t_lower - cf).abs() < 1e-9 * cf);
    }

    #[test]
    fn dini_modulus_is_global() {
        let m = Modulus::log_power(2.0).unwrap();
        let pred = predict_lifespan(&damped_wave(), &m, 0.1, &LifespanConstants::default()).unwrap();
        assert!(pred.global_existence);
        assert_eq!(pred.t_lower(), f64::INFINITY);
    }

    #[test]
    fn infinite_critical_exponent_is_rejected() {
        let p = EquationParams::new(1.0, 1.0, 1).unwrap();
        let r = predict_lifespan(&p, &Modulus::constant_one(), 0.1, &LifespanConstants::default());
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn monotone_in_epsilon() {
        let p = damped_wave();
        let ms = [
            Modulus::constant_one(),
            Modulus::power_law(-1.0).unwrap(),
            Modulus::log_power(0.5).unwrap(),
            Modulus::log_power(1.0).unwrap(),
            Modulus::iter_log_power(2, 0.5).unwrap(),
        ];
        for m in &ms {
            let mut last = f64::INFINITY;
            for i in 0..40 {
                let eps = 0.02 + 0.03 * i as f64;
                let lt = predict_lifespan(&p, m, eps, &LifespanConstants::default()).unwrap().log_t_lower;
                assert!(lt <= last + 1e-12, "{} not monotone at eps {eps}", m.name());
                last = lt;
            }
        }
    }

    #[test]
    fn calibration_brackets_measurements() {
        let p = damped_wave();
        let m = Modulus::power_law(-1.0).unwrap();
        let samples: Vec<(f64, f64)> = [0.4f64, 0.3, 0.2, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &eps)| (eps, 3.0 * (1.0 + 0.05 * i as f64) * eps.powi(-2)))
            .collect();
        let cal = calibrate_constants(&p, &m, &samples).unwrap();
        for &(eps, t) in &samples {
            let pred = predict_lifespan(&p, &m, eps, &cal.constants).unwrap();
            assert!(pred.t_lower() <= t * (1.0 + 1e-9) && t <= pred.t_upper() * (1.0 + 1e-9));
        }
        assert!(calibrate_constants(&p, &m, &samples[..1]).is_err());
    }
}
