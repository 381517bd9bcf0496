//! Scalar quantities derived from the equation parameters `(σ, δ, n)`.
//!
//! Everything downstream (moduli, kernels, solver, diagnostics) reads its
//! exponents from [`EquationParams`] so that the formulas live in one place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the band around `δ = σ/2` classified as the limit case.
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// Default value of the free constant used for `s₀` when both `σ` and `δ` are integers.
pub const DEFAULT_EPSILON0: f64 = 0.5;

const INTEGER_TOLERANCE: f64 = 1e-12;

/// A real number or `+∞`, used for the critical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DampingRegime {
    /// `δ < σ/2`
    Effective,
    /// `δ = σ/2`
    Limit,
    /// `δ > σ/2`
    NonEffective,
}

impl std::fmt::Display for DampingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DampingRegime::Effective => "effective",
            DampingRegime::Limit => "limit",
            DampingRegime::NonEffective => "non-effective",
        };
        f.write_str(s)
    }
}

/// Parameters of `u_tt + (-Δ)^σ u + (-Δ)^δ u_t = |u|^{p_c} μ(|u|)` in `ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationParams {
    sigma: f64,
    delta: f64,
    n: usize,
    epsilon0: f64,
}

impl EquationParams {
    pub fn new(sigma: f64, delta: f64, n: usize) -> Result<Self> {
        Self::with_epsilon0(sigma, delta, n, DEFAULT_EPSILON0)
    }

    pub fn with_epsilon0(sigma: f64, delta: f64, n: usize, epsilon0: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 1.0 {
            return Err(Error::InvalidParams(format!("sigma must be >= 1, got {sigma}")));
        }
        if !delta.is_finite() || delta < 0.0 || delta > sigma {
            return Err(Error::InvalidParams(format!(
                "delta must lie in [0, sigma], got delta = {delta}, sigma = {sigma}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParams("space dimension n must be >= 1".into()));
        }
        if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon0 must lie in (0, 1), got {epsilon0}")));
        }
        Ok(Self { sigma, delta, n, epsilon0 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// `min{2δ, σ}`
    pub fn min_term(&self) -> f64 {
        (2.0 * self.delta).min(self.sigma)
    }

    /// `n − min{2δ, σ}`; positive exactly when the critical exponent is finite.
    pub fn effective_dim(&self) -> f64 {
        self.dim() - self.min_term()
    }

    pub fn kappa(&self) -> f64 {
        2.0 * self.sigma - self.min_term()
    }

    pub fn critical_exponent(&self) -> ExtReal {
        let d = self.effective_dim();
        if d > 0.0 {
            ExtReal::Finite(1.0 + 2.0 * self.sigma / d)
        } else {
            ExtReal::PosInfinity
        }
    }

    /// Finite critical exponent or an error naming the dimension constraint.
    pub fn require_finite_pc(&self) -> Result<f64> {
        self.critical_exponent().finite().ok_or_else(|| {
            Error::InvalidParams(format!(
                "critical exponent is infinite: n = {} <= min(2 delta, sigma) = {}",
                self.n,
                self.min_term()
            ))
        })
    }

    /// `(s₀, q₀)` with `q₀ = n + 2 s₀`.
    pub fn s0_q0(&self) -> (f64, f64) {
        let sigma_int = is_integer(self.sigma);
        let delta_int = is_integer(self.delta);
        let s0 = match (sigma_int, delta_int) {
            (false, false) => frac(self.sigma).min(frac(self.delta)),
            (false, true) => frac(self.sigma),
            (true, false) => frac(self.delta),
            (true, true) => self.epsilon0,
        };
        (s0, self.dim() + 2.0 * s0)
    }

    pub fn regime(&self) -> DampingRegime {
        let half = 0.5 * self.sigma;
        if (self.delta - half).abs() < REGIME_TOLERANCE {
            DampingRegime::Limit
        } else if self.delta < half {
            DampingRegime::Effective
        } else {
            DampingRegime::NonEffective
        }
    }

    /// Dimension constraints under which small-data global existence is proved
    /// for Dini moduli.
    pub fn global_existence_admissible(&self) -> Admissibility {
        let n = self.dim();
        let (s, d) = (self.sigma, self.delta);
        match self.regime() {
            DampingRegime::Effective => {
                if n <= 2.0 * d {
                    Admissibility::reject("effective:n-not-above-2delta")
                } else if n >= 2.0 * s {
                    Admissibility::reject("effective:n-not-below-2sigma")
                } else {
                    Admissibility::accept("effective:ok")
                }
            }
            DampingRegime::Limit => {
                if n > s {
                    Admissibility::accept("limit:ok")
                } else {
                    Admissibility::reject("limit:n-not-above-sigma")
                }
            }
            DampingRegime::NonEffective => {
                // The n = 1, σ ∈ (2/3, 1) branch is unreachable for σ ≥ 1.
                if s <= 1.0 {
                    return Admissibility::reject("noneffective:unsupported-by-theory");
                }
                if n <= s {
                    return Admissibility::reject("noneffective:n-not-above-sigma");
                }
                if n <= (2.0 * s).min(n_bar(s)) {
                    Admissibility::accept("noneffective:ok")
                } else {
                    Admissibility::reject("noneffective:n-above-bound")
                }
            }
        }
    }
}

/// Upper dimension bound `n̄(σ)` of the non-effective global existence result.
pub fn n_bar(sigma: f64) -> f64 {
    let a = 3.0 * sigma - 2.0;
    0.5 * a * ((1.0 + 8.0 * sigma / (a * a)).sqrt() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub reason: &'static str,
}

impl Admissibility {
    fn accept(reason: &'static str) -> Self {
        Self { admissible: true, reason }
    }

    fn reject(reason: &'static str) -> Self {
        Self { admissible: false, reason }
    }
}

pub(crate) fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < INTEGER_TOLERANCE
}

/// Fractional part `{x} = x − [x]`.
pub(crate) fn frac(x: f64) -> f64 {
    if is_integer(x) {
        0.0
    } else {
        x - x.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(sigma: f64, delta: f64, n: usize) -> EquationParams {
        EquationParams::new(sigma, delta, n).unwrap()
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(p(1.0, 0.0, 1).critical_exponent(), ExtReal::Finite(3.0));
        assert_eq!(p(1.0, 1.0, 1).critical_exponent(), ExtReal::PosInfinity);
        assert_eq!(p(2.0, 1.0, 3).critical_exponent(), ExtReal::Finite(5.0));
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(p(1.0, 0.0, 1).kappa(), 2.0);
        assert_eq!(p(1.0, 1.0, 1).kappa(), 1.0);
        assert_eq!(p(2.0, 0.5, 1).kappa(), 3.0);
    }

    #[test]
    fn s0_examples() {
        let (s0, q0) = p(1.5, 0.7, 1).s0_q0();
        assert!((s0 - 0.5).abs() < 1e-14 && (q0 - 2.0).abs() < 1e-14);
        assert_eq!(p(2.0, 1.0, 1).s0_q0(), (0.5, 2.0));
        let (s0, q0) = p(1.5, 1.0, 2).s0_q0();
        assert!((s0 - 0.5).abs() < 1e-14 && (q0 - 3.0).abs() < 1e-14);
        let custom = EquationParams::with_epsilon0(1.0, 0.0, 1, 0.25).unwrap();
        assert_eq!(custom.s0_q0(), (0.25, 1.5));
    }

    #[test]
    fn admissibility_examples() {
        assert!(p(1.0, 0.0, 1).global_existence_admissible().admissible);
        let a = p(1.0, 0.0, 2).global_existence_admissible();
        assert!(!a.admissible);
        assert_eq!(a.reason, "effective:n-not-below-2sigma");
        // n̄(2) = 2(√2 + 1) ≈ 4.83, so 1 < 2 < 3 ≤ min{4, n̄(2)}.
        assert!((n_bar(2.0) - 2.0 * (2f64.sqrt() + 1.0)).abs() < 1e-14);
        assert!(p(2.0, 2.0, 3).global_existence_admissible().admissible);
        let open = p(1.0, 0.75, 2).global_existence_admissible();
        assert_eq!(open.reason, "noneffective:unsupported-by-theory");
        assert!(p(2.0, 1.0, 3).global_existence_admissible().admissible);
        assert!(!p(2.0, 1.0, 2).global_existence_admissible().admissible);
    }

    #[test]
    fn regime_boundary_uses_tolerance() {
        assert_eq!(p(1.0, 0.5, 1).regime(), DampingRegime::Limit);
        assert_eq!(p(1.0, 0.5 + 1e-13, 1).regime(), DampingRegime::Limit);
        assert_eq!(p(1.0, 0.5 + 1e-9, 1).regime(), DampingRegime::NonEffective);
        assert_eq!(p(1.0, 0.49, 1).regime(), DampingRegime::Effective);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let err = EquationParams::new(1.0, 1.5, 1).unwrap_err();
        assert!(err.to_string().contains("delta must lie in [0, sigma]"));
        assert!(EquationParams::new(0.5, 0.0, 1).is_err());
        assert!(EquationParams::new(1.0, 0.0, 0).is_err());
        assert!(EquationParams::with_epsilon0(1.0, 0.0, 1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kappa_bounds_and_formula(sigma in 1.0f64..4.0, t in 0.0f64..=1.0, n in 1usize..6) {
            let params = p(sigma, t * sigma, n);
            let k = params.kappa();
            prop_assert!(sigma - 1e-12 <= k && k <= 2.0 * sigma + 1e-12);
            if params.delta() >= sigma / 2.0 {
                prop_assert!((k - sigma).abs() < 1e-12);
            } else {
                prop_assert!((k - 2.0 * (sigma - params.delta())).abs() < 1e-12);
            }
            let (s0, q0) = params.s0_q0();
            prop_assert!(s0 > 0.0 && s0 < 1.0);
            prop_assert!(q0 > params.dim());
        }

        #[test]
        fn critical_exponent_decreases_in_n(sigma in 1.0f64..4.0, t in 0.0f64..=1.0) {
            let delta = t * sigma;
            let mut last = f64::INFINITY;
            for n in 1..12 {
                if let ExtReal::Finite(pc) = p(sigma, delta, n).critical_exponent() {
                    prop_assert!(pc < last);
                    last = pc;
                }
            }
        }

        #[test]
        fn fujita_exponent_for_damped_waves(n in 1usize..20) {
            let pc = p(1.0, 0.0, n).critical_exponent().finite().unwrap();
            prop_assert!((pc - (1.0 + 2.0 / n as f64)).abs() < 1e-14);
        }
    }
}
