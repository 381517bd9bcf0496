//! Moduli of continuity `μ`, the Dini classification and the hypothesis checks
//! used by the existence and blow-up results.
//!
//! Internally most quantities are evaluated in the variable `z = ln(1/τ)`,
//! which keeps tiny arguments (τ far below `f64::MIN_POSITIVE`) representable.

mod hfunc;
mod lifespan;

pub use lifespan::{calibrate_constants, predict_lifespan, Calibration, LifespanConstants, LifespanPrediction};

use serde::Serialize;

use crate::error::{Error, Result};

/// `τ₀ = e⁻¹`, the default anchor for every variant except iterated logs.
pub const DEFAULT_TAU0: f64 = 0.367_879_441_171_442_33;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModulusKind {
    /// `μ(τ) = τ^a`
    PowerLaw { a: f64 },
    /// `μ ≡ 1`
    ConstantOne,
    /// `μ(τ) = (ln 1/τ)^(−γ)`
    LogPower { gamma: f64 },
    /// `μ(τ) = (ℓ_k)^(−γ) Π_{j<k} ℓ_j^(−1)` with `ℓ_j` the j-fold iterated log of `1/τ`.
    IterLogPower { k: u32, gamma: f64 },
    /// Piecewise linear in `(ln τ, μ)`; samples sorted by `ln τ`.
    Tabulated { log_tau: Vec<f64>, mu: Vec<f64> },
}

/// A modulus of continuity on `[0, τ₀]`, held constant at `μ(τ₀)` above `τ₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Modulus {
    kind: ModulusKind,
    tau0: f64,
    z0: f64,
    mu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiniVerdict {
    Dini,
    NonDini,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiniClassification {
    pub verdict: DiniVerdict,
    /// 1 for analytic answers; in `[0, 1]` for the tabulated heuristic.
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A1Report {
    /// Largest sampled value of `τ|μ'(τ)|/μ(τ)`.
    pub sup: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A3Report {
    pub pass: bool,
    /// Grid points where the second difference of `τ^{p_c} μ(τ)` is negative beyond tolerance.
    pub violations: Vec<f64>,
}

/// `exp^{[k]}(1)`'s logarithm chain: returns `ln(1/τ₀)` for which `ℓ_k(τ₀) = 1`.
fn iter_log_default_z0(k: u32) -> f64 {
    // ℓ_k = 1 ⇔ ℓ_{k−1} = e ⇔ … ⇔ z = exp^{[k−1]}(1)
    let mut z = 1.0f64;
    for _ in 1..k {
        z = z.exp();
    }
    z
}

/// `ℓ_1 … ℓ_k` at `z`, or `None` when some iterated log is non-positive.
fn iter_logs(z: f64, k: u32) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(k as usize);
    let mut l = z;
    for j in 0..k {
        if j > 0 {
            l = l.ln();
        }
        if !(l > 0.0) {
            return None;
        }
        out.push(l);
    }
    Some(out)
}

impl Modulus {
    pub fn power_law(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidParams(format!("power-law exponent must be finite, got {a}")));
        }
        Self::build(ModulusKind::PowerLaw { a }, DEFAULT_TAU0)
    }

    pub fn constant_one() -> Self {
        Self::build(ModulusKind::ConstantOne, DEFAULT_TAU0).expect("valid default")
    }

    pub fn log_power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        Self::build(ModulusKind::LogPower { gamma }, DEFAULT_TAU0)
    }

    /// Default `τ₀ = 1/exp^{[k]}(1)`, so that `ℓ_k(τ₀) = 1`.
    pub fn iter_log_power(k: u32, gamma: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("iterated log depth k must be >= 2, got {k}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        let z0 = iter_log_default_z0(k);
        let tau0 = (-z0).exp();
        if !(tau0 > 0.0) {
            return Err(Error::Domain(format!("default tau0 for iterated log depth {k} underflows f64")));
        }
        Self::build(ModulusKind::IterLogPower { k, gamma }, tau0)
    }

    /// Samples `(τ, μ)` with strictly increasing positive `τ` and non-decreasing `μ ≥ 0`.
    /// The last sample is `τ₀`.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParams("tabulated modulus needs at least two samples".into()));
        }
        let mut log_tau = Vec::with_capacity(samples.len());
        let mut mu = Vec::with_capacity(samples.len());
        for (i, &(t, m)) in samples.iter().enumerate() {
            if !(t > 0.0 && t.is_finite() && m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidParams(format!("invalid sample {i}: ({t}, {m})")));
            }
            if i > 0 {
                let (tp, mp) = samples[i - 1];
                if t <= tp {
                    return Err(Error::InvalidParams("sample tau values must increase".into()));
                }
                if m < mp {
                    return Err(Error::InvalidParams("sample mu values must be non-decreasing".into()));
                }
            }
            log_tau.push(t.ln());
            mu.push(m);
        }
        let tau0 = samples[samples.len() - 1].0;
        Self::build(ModulusKind::Tabulated { log_tau, mu }, tau0)
    }

    /// Move the anchor `τ₀`. Log-type variants require every iterated log to be
    /// positive at `τ₀`.
    pub fn with_tau0(&self, tau0: f64) -> Result<Self> {
        if matches!(self.kind, ModulusKind::Tabulated { .. }) {
            return Err(Error::InvalidParams("tabulated moduli take tau0 from their last sample".into()));
        }
        Self::build(self.kind.clone(), tau0)
    }

    fn build(kind: ModulusKind, tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau0 < 1.0) {
            return Err(Error::InvalidParams(format!("tau0 must lie in (0, 1), got {tau0}")));
        }
        let z0 = -tau0.ln();
        if let ModulusKind::IterLogPower { k, .. } = kind {
            if iter_logs(z0, k).is_none() {
                return Err(Error::Domain(format!(
                    "iterated logarithms of depth {k} are not positive at tau0 = {tau0}"
                )));
            }
        }
        let mut m = Self { kind, tau0, z0, mu0: 0.0 };
        m.mu0 = m.mu_z_raw(z0);
        Ok(m)
    }

    /// Parse a compact specification: `one`, `power:<a>`, `log:<gamma>`,
    /// `iterlog:<k>:<gamma>`, optionally followed by `@<tau0>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (body, tau0) = match spec.split_once('@') {
            Some((b, t)) => {
                let t: f64 =
                    t.trim().parse().map_err(|_| Error::InvalidParams(format!("bad tau0 in modulus spec '{spec}'")))?;
                (b.trim(), Some(t))
            }
            None => (spec, None),
        };
        let parts: Vec<&str> = body.split(':').map(str::trim).collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::InvalidParams(format!("bad number '{s}' in modulus spec '{spec}'")))
        };
        let m = match parts.as_slice() {
            ["one"] | ["constant"] => Self::constant_one(),
            ["power", a] => Self::power_law(num(a)?)?,
            ["log", g] => Self::log_power(num(g)?)?,
            ["iterlog", k, g] => {
                let k: u32 = k.parse().map_err(|_| Error::InvalidParams(format!("bad depth '{k}' in modulus spec")))?;
                Self::iter_log_power(k, num(g)?)?
            }
            _ => {
                return Err(Error::InvalidParams(format!(
                    "unknown modulus spec '{spec}' (expected one, power:<a>, log:<gamma>, iterlog:<k>:<gamma>)"
                )))
            }
        };
        match tau0 {
            Some(t) => m.with_tau0(t),
            None => Ok(m),
        }
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// `ln(1/τ₀)`
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModulusKind::PowerLaw { a } => format!("power:{a}"),
            ModulusKind::ConstantOne => "one".into(),
            ModulusKind::LogPower { gamma } => format!("log:{gamma}"),
            ModulusKind::IterLogPower { k, gamma } => format!("iterlog:{k}:{gamma}"),
            ModulusKind::Tabulated { mu, .. } => format!("tabulated[{}]", mu.len()),
        }
    }

    /// `μ` on `[0, ∞)`. At `τ = 0` the right limit is returned (0 for genuine
    /// moduli, 1 for `ConstantOne`, `+∞` for negative power laws).
    pub fn eval_mu(&self, tau: f64) -> Result<f64> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::Domain(format!("mu evaluated at negative argument {tau}")));
        }
        if tau == 0.0 {
            return Ok(self.mu_at_zero());
        }
        Ok(self.mu_unchecked(tau))
    }

    /// `μ(τ)` for `τ > 0` without validation; used in hot loops.
    #[inline]
    pub fn mu_unchecked(&self, tau: f64) -> f64 {
        if tau >= self.tau0 {
            return self.mu0;
        }
        match &self.kind {
            ModulusKind::PowerLaw { a } => tau.powf(*a),
            ModulusKind::ConstantOne => 1.0,
            ModulusKind::LogPower { gamma } => (-tau.ln()).powf(-gamma),
            _ => self.mu_z(-tau.ln()),
        }
    }

    fn mu_at_zero(&self) -> f64 {
        match &self.kind {
            ModulusKind::PowerLaw { a } if *a > 0.0 => 0.0,
            ModulusKind::PowerLaw { a } if *a == 0.0 => 1.0,
            ModulusKind::PowerLaw { .. } => f64::INFINITY,
            ModulusKind::ConstantOne => 1.0,
            ModulusKind::LogPower { .. } | ModulusKind::IterLogPower { .. } => 0.0,
            ModulusKind::Tabulated { .. } => self.mu_z(f64::INFINITY),
        }
    }

    /// `μ(e^{−z})` including the continuation for `z < z₀`.
    pub fn mu_z(&self, z: f64) -> f64 {
        if z <= self.z0 {
            self.mu0
        } else {
            self.mu_z_raw(z)
        }
    }

    fn mu_z_raw(&self, z: f64) -> f64 {
        match &self.kind {
            ModulusKind::PowerLaw { a } => (-a * z).exp(),
            ModulusKind::ConstantOne => 1.0,
            ModulusKind::LogPower { gamma } => z.powf(-gamma),
            ModulusKind::IterLogPower { k, gamma } => match iter_logs(z, *k) {
                Some(l) => {
                    let kk = *k as usize;
                    let log_mu = -l[1..kk].iter().sum::<f64>() - gamma * l[kk - 1].ln();
                    log_mu.exp()
                }
                None => 0.0,
            },
            ModulusKind::Tabulated { log_tau, mu } => tab_eval(log_tau, mu, -z),
        }
    }

    /// `τ μ'(τ)/μ(τ)`, the logarithmic derivative appearing in (A₁).
    pub fn log_derivative(&self, tau: f64) -> f64 {
        self.log_derivative_z(-tau.ln())
    }

    /// Left derivative at `τ₀`, zero on the continuation.
    pub fn log_derivative_z(&self, z: f64) -> f64 {
        if z < self.z0 {
            return 0.0;
        }
        match &self.kind {
            ModulusKind::PowerLaw { a } => *a,
            ModulusKind::ConstantOne => 0.0,
            ModulusKind::LogPower { gamma } => gamma / z,
            ModulusKind::IterLogPower { k, gamma } => match iter_logs(z, *k) {
                Some(l) => {
                    let mut prod = 1.0;
                    let mut sum = 0.0;
                    for (j, lj) in l.iter().enumerate() {
                        prod *= lj;
                        sum += if j + 1 < l.len() { 1.0 / prod } else { gamma / prod };
                    }
                    sum
                }
                None => f64::INFINITY,
            },
            ModulusKind::Tabulated { log_tau, mu } => {
                let x = (-z).min(log_tau[log_tau.len() - 1] - 1e-12);
                let m = tab_eval(log_tau, mu, x);
                let s = tab_slope(log_tau, mu, x);
                if m > 0.0 {
                    s / m
                } else if s == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn dini_classify(&self) -> DiniClassification {
        let analytic = |dini: bool| DiniClassification {
            verdict: if dini { DiniVerdict::Dini } else { DiniVerdict::NonDini },
            confidence: 1.0,
        };
        match &self.kind {
            ModulusKind::PowerLaw { a } => analytic(*a > 0.0),
            ModulusKind::ConstantOne => analytic(false),
            ModulusKind::LogPower { gamma } | ModulusKind::IterLogPower { gamma, .. } => analytic(*gamma > 1.0),
            ModulusKind::Tabulated { log_tau, mu } => tab_dini(log_tau, mu),
        }
    }

    /// Sampled supremum of `τ|μ'|/μ` over `[tau_lo, tau_hi]`; fails when the ratio
    /// keeps growing toward the small end of the range.
    pub fn check_a1(&self, tau_lo: f64, tau_hi: f64) -> Result<A1Report> {
        if !(tau_lo > 0.0 && tau_lo < tau_hi) {
            return Err(Error::Domain(format!("invalid A1 range [{tau_lo}, {tau_hi}]")));
        }
        let pts = 1000;
        let (zl, zh) = (-tau_hi.ln(), -tau_lo.ln());
        let ratios: Vec<f64> = (0..pts)
            .map(|i| {
                let z = zl + (zh - zl) * i as f64 / (pts - 1) as f64;
                self.log_derivative_z(z).abs()
            })
            .collect();
        let sup = ratios.iter().cloned().fold(0.0, f64::max);
        // Compare the innermost tenth (smallest τ) against the rest.
        let split = pts - pts / 10;
        let head = ratios[..split].iter().cloned().fold(0.0, f64::max);
        let tail = ratios[split..].iter().cloned().fold(0.0, f64::max);
        let pass = sup.is_finite() && tail <= 1.5 * head + 1e-12;
        Ok(A1Report { sup, pass })
    }

    /// Convexity of `g(τ) = τ^{p_c} μ(τ)` on `(0, τ₀]`, sampled on a geometric grid
    /// spanning eight decades below `τ₀`.
    pub fn check_a3(&self, p_c: f64, points: usize, tol: f64) -> A3Report {
        let points = points.max(5);
        let lo = self.tau0 * 1e-8;
        let taus: Vec<f64> = (0..points).map(|i| lo * (self.tau0 / lo).powf(i as f64 / (points - 1) as f64)).collect();
        let g: Vec<f64> = taus.iter().map(|&t| t.powf(p_c) * self.mu_unchecked(t)).collect();
        let mut violations = Vec::new();
        for i in 1..points - 1 {
            let h1 = taus[i] - taus[i - 1];
            let h2 = taus[i + 1] - taus[i];
            let d2 = 2.0 * (h1 * g[i + 1] - (h1 + h2) * g[i] + h2 * g[i - 1]) / (h1 * h2 * (h1 + h2));
            let scale = (g[i - 1].abs() + 2.0 * g[i].abs() + g[i + 1].abs()) / (h1 * h2);
            if d2 < -tol * scale {
                violations.push(taus[i]);
            }
        }
        A3Report { pass: violations.is_empty(), violations }
    }
}

/// Index of the segment containing `x`, clamped to valid segments.
fn tab_segment(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

fn tab_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = tab_segment(xs, x);
    let s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    (ys[i] + s * (x - xs[i])).max(0.0)
}

fn tab_slope(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x >= xs[last] {
        return 0.0;
    }
    if x < xs[0] && tab_eval(xs, ys, x) == 0.0 {
        return 0.0;
    }
    let i = tab_segment(xs, x);
    (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
}

/// Growth of the partial integrals `∫_{τ_k}^{τ₀} μ(τ)/τ dτ` along a geometric
/// sequence inside the sampled range. The increments per unit of `ln(1/τ)` are
/// the band averages of `μ`; fitting them against `ln(1/τ)` gives a decay rate
/// whose position relative to 1 decides convergence.
fn tab_dini(xs: &[f64], ys: &[f64]) -> DiniClassification {
    let indeterminate = DiniClassification { verdict: DiniVerdict::Indeterminate, confidence: 0.0 };
    if ys[0] == 0.0 {
        return DiniClassification { verdict: DiniVerdict::Dini, confidence: 1.0 };
    }
    let z_hi = -xs[0];
    let z_lo = -xs[xs.len() - 1];
    if z_lo <= 0.0 || z_hi / z_lo < 2.0 {
        return indeterminate;
    }
    let bands: i32 = 16;
    let ratio = (z_hi / z_lo).powf(1.0 / bands as f64);
    let mut pts = Vec::new();
    for b in 0..bands {
        let (za, zb) = (z_lo * ratio.powi(b), z_lo * ratio.powi(b + 1));
        let steps = 32;
        let mut acc = 0.0;
        for j in 0..steps {
            let z = za + (zb - za) * (j as f64 + 0.5) / steps as f64;
            acc += tab_eval(xs, ys, -z);
        }
        let avg = acc / steps as f64;
        if avg <= 0.0 {
            return DiniClassification { verdict: DiniVerdict::Dini, confidence: 1.0 };
        }
        pts.push(((za * zb).sqrt().ln(), avg.ln()));
    }
    // Use the inner half (smallest τ) of the bands.
    let tail = &pts[(bands / 2) as usize..];
    let m = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = tail.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy < 1e-24 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    let rate = -slope;
    let confidence = ((rate - 1.0).abs() / 0.5).min(1.0) * r2;
    let verdict = if rate > 1.2 {
        DiniVerdict::Dini
    } else if rate < 0.8 {
        DiniVerdict::NonDini
    } else {
        DiniVerdict::Indeterminate
    };
    DiniClassification { verdict, confidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(Modulus::constant_one().eval_mu(0.3).unwrap(), 1.0);
        let lp = Modulus::log_power(1.0).unwrap();
        assert!((lp.eval_mu((-2.0f64).exp()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(lp.eval_mu(0.0).unwrap(), 0.0);
        let pw = Modulus::power_law(-1.0).unwrap();
        // τ = 1 lies above τ₀, where μ is continued by μ(τ₀) = e.
        assert!((pw.eval_mu(1.0).unwrap() - std::f64::consts::E).abs() < 1e-12);
        let pw1 = Modulus::power_law(-1.0).unwrap().with_tau0(0.999_999).unwrap();
        assert!((pw1.eval_mu(0.999).unwrap() - 1.0 / 0.999).abs() < 1e-12);
        assert!(lp.eval_mu(-1.0).is_err());
    }

    #[test]
    fn continuation_above_tau0() {
        let lp = Modulus::log_power(0.5).unwrap();
        let at = lp.eval_mu(lp.tau0()).unwrap();
        assert!((at - 1.0).abs() < 1e-15);
        assert_eq!(lp.eval_mu(5.0).unwrap(), at);
    }

    #[test]
    fn iter_log_default_anchor() {
        let m = Modulus::iter_log_power(2, 0.5).unwrap();
        assert!((m.z0() - std::f64::consts::E).abs() < 1e-14);
        // ℓ₂(τ₀) = 1 so μ(τ₀) = 1/ℓ₁(τ₀) = 1/e.
        assert!((m.eval_mu(m.tau0()).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
        let direct = |tau: f64| {
            let l1 = (1.0 / tau).ln();
            1.0 / (l1 * l1.ln().powf(0.5))
        };
        for &tau in &[1e-3, 1e-10, 1e-100] {
            let v = m.eval_mu(tau).unwrap();
            assert!((v - direct(tau)).abs() < 1e-13 * direct(tau));
        }
        assert!(Modulus::iter_log_power(5, 0.5).is_err());
        assert!(Modulus::iter_log_power(2, 0.5).unwrap().with_tau0(0.5).is_err());
    }

    #[test]
    fn dini_catalogue() {
        assert_eq!(Modulus::log_power(2.0).unwrap().dini_classify().verdict, DiniVerdict::Dini);
        assert_eq!(Modulus::log_power(0.5).unwrap().dini_classify().verdict, DiniVerdict::NonDini);
        assert_eq!(Modulus::log_power(1.0).unwrap().dini_classify().verdict, DiniVerdict::NonDini);
        assert_eq!(Modulus::constant_one().dini_classify().verdict, DiniVerdict::NonDini);
        assert_eq!(Modulus::power_law(0.3).unwrap().dini_classify().verdict, DiniVerdict::Dini);
    }

    fn sampled(m: &Modulus, decades: f64, n: usize) -> Vec<(f64, f64)> {
        let z0 = m.z0();
        (0..n)
            .rev()
            .map(|i| {
                let z = z0 * (decades * i as f64 / (n - 1) as f64).exp();
                let tau = (-z).exp();
                (tau, m.mu_z(z))
            })
            .collect()
    }

    #[test]
    fn tabulated_dini_heuristic() {
        // Sample far below τ₀ so that ln(1/τ) spans several e-folds.
        for (gamma, expected) in [(2.5, DiniVerdict::Dini), (0.3, DiniVerdict::NonDini)] {
            let m = Modulus::log_power(gamma).unwrap();
            let tab = Modulus::tabulated(&sampled(&m, 6.0, 200)).unwrap();
            let c = tab.dini_classify();
            assert_eq!(c.verdict, expected, "gamma {gamma}");
            assert!(c.confidence > 0.5);
        }
        let m = Modulus::log_power(1.0).unwrap();
        let tab = Modulus::tabulated(&sampled(&m, 6.0, 200)).unwrap();
        assert_eq!(tab.dini_classify().verdict, DiniVerdict::Indeterminate);
        let narrow = Modulus::tabulated(&[(0.1, 0.5), (0.2, 0.6)]).unwrap();
        assert_eq!(narrow.dini_classify().verdict, DiniVerdict::Indeterminate);
    }

    #[test]
    fn tabulated_interpolates_in_log_tau() {
        let tab = Modulus::tabulated(&[(1e-4, 0.2), (1e-2, 0.4), (0.3, 0.5)]).unwrap();
        assert!((tab.eval_mu(1e-3).unwrap() - 0.3).abs() < 1e-14);
        assert_eq!(tab.eval_mu(0.9).unwrap(), 0.5);
        // Extrapolation below the first sample continues the first slope, clamped at 0.
        assert!((tab.eval_mu(1e-5).unwrap() - 0.1).abs() < 1e-14);
        assert_eq!(tab.eval_mu(1e-9).unwrap(), 0.0);
        assert!(Modulus::tabulated(&[(0.1, 0.5), (0.2, 0.4)]).is_err());
    }

    #[test]
    fn a1_examples() {
        let lp = Modulus::log_power(0.7).unwrap();
        let r = lp.check_a1(1e-30, lp.tau0()).unwrap();
        assert!(r.pass);
        assert!((r.sup - 0.7).abs() < 1e-12);
        let r = Modulus::constant_one().check_a1(1e-10, 0.3).unwrap();
        assert_eq!(r.sup, 0.0);
        let r = Modulus::power_law(0.4).unwrap().check_a1(1e-10, 0.3).unwrap();
        assert!((r.sup - 0.4).abs() < 1e-14 && r.pass);
    }

    #[test]
    fn log_derivative_matches_finite_differences() {
        let ms = [
            Modulus::log_power(0.5).unwrap(),
            Modulus::iter_log_power(2, 0.8).unwrap(),
            Modulus::iter_log_power(3, 1.5).unwrap(),
            Modulus::power_law(0.3).unwrap(),
        ];
        for m in &ms {
            for &f in &[1e-3, 1e-1, 0.5] {
                let tau = m.tau0() * f;
                let h = 1e-6;
                let (up, dn) = (m.mu_unchecked(tau * (1.0 + h)), m.mu_unchecked(tau * (1.0 - h)));
                let fd = (up - dn) / (2.0 * h) / m.mu_unchecked(tau);
                let an = m.log_derivative(tau);
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{}: {fd} vs {an}", m.name());
            }
        }
    }

    #[test]
    fn a3_examples() {
        assert!(Modulus::constant_one().check_a3(3.0, 1000, 1e-8).pass);
        assert!(Modulus::log_power(0.5).unwrap().check_a3(3.0, 1000, 1e-8).pass);
        let r = Modulus::power_law(-2.5).unwrap().check_a3(3.0, 1000, 1e-8);
        assert!(!r.pass);
        assert!(!r.violations.is_empty());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(Modulus::from_spec("one").unwrap(), Modulus::constant_one());
        assert_eq!(Modulus::from_spec("log:0.5").unwrap(), Modulus::log_power(0.5).unwrap());
        let m = Modulus::from_spec("power:-1@0.5").unwrap();
        assert_eq!(m.tau0(), 0.5);
        assert_eq!(m.kind(), &ModulusKind::PowerLaw { a: -1.0 });
        assert!(matches!(Modulus::from_spec("iterlog:3:2").unwrap().kind(), ModulusKind::IterLogPower { k: 3, .. }));
        assert!(Modulus::from_spec("cubic").is_err());
        assert!(Modulus::from_spec("log:abc").is_err());
    }

    fn catalogue() -> impl Strategy<Value = Modulus> {
        prop_oneof![
            (0.0f64..3.0).prop_map(|a| Modulus::power_law(a).unwrap()),
            Just(Modulus::constant_one()),
            (0.01f64..3.0).prop_map(|g| Modulus::log_power(g).unwrap()),
            ((2u32..4), (0.01f64..3.0)).prop_map(|(k, g)| Modulus::iter_log_power(k, g).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn mu_is_non_decreasing(m in catalogue()) {
            let mut last = m.eval_mu(0.0).unwrap();
            for i in 1..=1000 {
                let tau = m.tau0() * (i as f64 / 1000.0).powi(3);
                let v = m.eval_mu(tau).unwrap();
                prop_assert!(v >= last * (1.0 - 1e-14), "{} at {tau}: {v} < {last}", m.name());
                last = v;
            }
        }
    }
}
