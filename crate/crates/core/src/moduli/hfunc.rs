//! The auxiliary function `H(τ) = ∫_τ^{τ₀} μ(ϱ)/ϱ dϱ` and its inverse.
//!
//! With `z = ln(1/τ)` the definition becomes `H = ∫_{z₀}^{z} μ(e^{−z'}) dz'`,
//! which is what both the closed forms and the root finder work with.

use super::{tab_eval, Modulus, ModulusKind};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions, QuadResult};

/// `(l^e − l₀^e)/e`, with the `e → 0` limit `ln(l/l₀)`.
fn pow_diff(l: f64, l0: f64, e: f64) -> f64 {
    let r = (l / l0).ln();
    if e == 0.0 {
        r
    } else {
        l0.powf(e) * (e * r).exp_m1() / e
    }
}

fn iter_log_k(z: f64, k: u32) -> f64 {
    let mut l = z;
    for _ in 1..k {
        l = l.ln();
    }
    l
}

/// Exact integral of the piecewise-linear tabulated `μ` over `x = ln τ ∈ [x, x_last]`.
fn tab_h(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    let mut acc = 0.0;
    for i in (0..last).rev() {
        if x >= xs[i + 1] {
            continue;
        }
        let a = x.max(xs[i]);
        acc += 0.5 * (xs[i + 1] - a) * (tab_eval(xs, ys, a) + ys[i + 1]);
        if x >= xs[i] {
            return acc;
        }
    }
    // Extrapolated region below the first sample.
    if ys[0] == 0.0 {
        return acc;
    }
    let s = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    if s > 0.0 {
        let a = x.max(xs[0] - ys[0] / s);
        acc += 0.5 * (xs[0] - a) * (tab_eval(xs, ys, a) + ys[0]);
    } else {
        acc += (xs[0] - x) * ys[0];
    }
    acc
}

impl Modulus {
    /// `H` as a function of `z = ln(1/τ)`; negative for `z < z₀` through the
    /// constant continuation of `μ`.
    pub fn h_z(&self, z: f64) -> f64 {
        let z0 = self.z0;
        if z <= z0 {
            return self.mu0 * (z - z0);
        }
        match &self.kind {
            ModulusKind::PowerLaw { a } => {
                if *a == 0.0 {
                    z - z0
                } else {
                    (-a * z0).exp() * (-a * (z - z0)).exp_m1() / (-a)
                }
            }
            ModulusKind::ConstantOne => z - z0,
            ModulusKind::LogPower { gamma } => pow_diff(z, z0, 1.0 - gamma),
            ModulusKind::IterLogPower { k, gamma } => pow_diff(iter_log_k(z, *k), iter_log_k(z0, *k), 1.0 - gamma),
            ModulusKind::Tabulated { log_tau, mu } => tab_h(log_tau, mu, -z),
        }
    }

    /// `H(τ)` for `τ ≥ 0`; `H(0)` is the (possibly infinite) right limit.
    pub fn h(&self, tau: f64) -> Result<f64> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::Domain(format!("H evaluated at negative argument {tau}")));
        }
        if tau == 0.0 {
            return Ok(self.h_at_zero());
        }
        Ok(self.h_z(-tau.ln()))
    }

    /// `lim_{τ→0⁺} H(τ)`: finite exactly for Dini moduli.
    pub fn h_at_zero(&self) -> f64 {
        self.h_z(f64::INFINITY)
    }

    /// `H(τ)` by adaptive quadrature in `z`, independent of the closed forms.
    pub fn h_quadrature(&self, tau: f64, abs_tol: f64) -> Result<QuadResult> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("quadrature H needs tau > 0, got {tau}")));
        }
        let z = -tau.ln();
        if z <= self.z0 {
            return Ok(QuadResult { value: self.mu0 * (z - self.z0), abs_error: 0.0, converged: true });
        }
        // Panels of doubling width keep the log-like integrands well resolved.
        let mut total = QuadResult { value: 0.0, abs_error: 0.0, converged: true };
        let mut a = self.z0;
        let mut width = 1.0;
        while a < z {
            let b = (a + width).min(z);
            let r = integrate(|s| self.mu_z(s), a, b, QuadOptions::new(abs_tol, 1e-13));
            total.value += r.value;
            total.abs_error += r.abs_error;
            total.converged &= r.converged;
            a = b;
            width *= 2.0;
        }
        if !total.converged {
            return Err(Error::IntegrationFailure(format!(
                "H quadrature at tau = {tau:e} reached error {:.3e}",
                total.abs_error
            )));
        }
        Ok(total)
    }

    /// Solve `H(e^{−z}) = ω` for `z`. Works for `ω` far beyond the range where
    /// `τ = e^{−z}` is representable.
    pub fn hinv_log(&self, omega: f64) -> Result<f64> {
        if omega.is_nan() {
            return Err(Error::Domain("H inverse of NaN".into()));
        }
        if omega == 0.0 {
            return Ok(self.z0);
        }
        if omega < 0.0 {
            if self.mu0 > 0.0 {
                return Ok(self.z0 + omega / self.mu0);
            }
            return Err(Error::Domain(format!("H inverse of {omega} with mu(tau0) = 0")));
        }
        if omega == f64::INFINITY {
            return Err(Error::Underflow { log_value: f64::NEG_INFINITY });
        }
        let sup = self.h_at_zero();
        if omega >= sup {
            return Err(Error::Domain(format!("omega = {omega:e} is outside the range of H (supremum {sup:e})")));
        }
        let mut lo = self.z0;
        let mut step = 1.0f64;
        let mut hi = self.z0 + step;
        while self.h_z(hi) < omega {
            lo = hi;
            step *= 2.0;
            hi = self.z0 + step;
            if !hi.is_finite() {
                return Err(Error::Underflow { log_value: f64::NEG_INFINITY });
            }
        }
        let mut z = lo;
        for _ in 0..400 {
            let r = self.h_z(z) - omega;
            if r == 0.0 {
                return Ok(z);
            }
            if r < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                break;
            }
            let slope = self.mu_z(z);
            let newton = z - r / slope;
            z = if slope > 0.0 && newton > lo && newton < hi {
                if (newton - z).abs() <= 2.0 * f64::EPSILON * z.abs() {
                    return Ok(newton);
                }
                newton
            } else if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(0.5 * (lo + hi))
    }

    /// `H⁻¹(ω)`; `H⁻¹(0) = τ₀` exactly. Errors with `Underflow` (carrying
    /// `ln H⁻¹(ω)`) when the result is below the smallest positive double.
    pub fn hinv(&self, omega: f64) -> Result<f64> {
        if omega == 0.0 {
            return Ok(self.tau0);
        }
        let z = self.hinv_log(omega)?;
        if z > -f64::MIN_POSITIVE.ln() {
            return Err(Error::Underflow { log_value: -z });
        }
        Ok((-z).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalogue() -> Vec<Modulus> {
        vec![
            Modulus::constant_one(),
            Modulus::power_law(-1.0).unwrap(),
            Modulus::power_law(0.5).unwrap(),
            Modulus::log_power(0.5).unwrap(),
            Modulus::log_power(1.0).unwrap(),
            Modulus::log_power(2.0).unwrap(),
            Modulus::iter_log_power(2, 0.5).unwrap(),
            Modulus::iter_log_power(2, 1.0).unwrap(),
            Modulus::iter_log_power(3, 2.0).unwrap(),
            Modulus::tabulated(&[(1e-6, 0.05), (1e-3, 0.1), (0.05, 0.3), (0.3, 0.5)]).unwrap(),
        ]
    }

    #[test]
    fn closed_form_examples() {
        let tau0 = super::super::DEFAULT_TAU0;
        let c = Modulus::constant_one();
        assert!((c.h(1e-3).unwrap() - (tau0.ln() - 1e-3f64.ln())).abs() < 1e-13);
        let pw = Modulus::power_law(-1.0).unwrap();
        let expect = (1e3 - 1.0 / tau0) / 1.0;
        assert!((pw.h(1e-3).unwrap() - expect).abs() < 1e-10);
        let lp = Modulus::log_power(0.5).unwrap();
        let l: f64 = (1e3f64).ln();
        let expect = (l.powf(0.5) - 1.0) / 0.5;
        assert!((lp.h(1e-3).unwrap() - expect).abs() < 1e-14);
        for m in catalogue() {
            assert_eq!(m.h(m.tau0()).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for m in catalogue() {
            for &f in &[0.9, 1e-2, 1e-6, 1e-40] {
                let tau = m.tau0() * f;
                let exact = m.h(tau).unwrap();
                let q = m.h_quadrature(tau, 1e-12).unwrap();
                assert!(
                    (exact - q.value).abs() <= 1e-8 * exact.abs().max(1.0),
                    "{} at {tau:e}: {exact} vs {}",
                    m.name(),
                    q.value
                );
            }
        }
    }

    #[test]
    fn limits_at_zero() {
        assert_eq!(Modulus::constant_one().h_at_zero(), f64::INFINITY);
        assert_eq!(Modulus::log_power(0.5).unwrap().h_at_zero(), f64::INFINITY);
        assert_eq!(Modulus::log_power(1.0).unwrap().h_at_zero(), f64::INFINITY);
        // ∫_1^∞ z^{−2} dz = 1
        assert!((Modulus::log_power(2.0).unwrap().h_at_zero() - 1.0).abs() < 1e-14);
        let tab = Modulus::tabulated(&[(0.01, 0.1), (0.1, 0.2)]).unwrap();
        assert!(tab.h_at_zero().is_finite());
        let flat = Modulus::tabulated(&[(0.01, 0.2), (0.1, 0.2)]).unwrap();
        assert_eq!(flat.h_at_zero(), f64::INFINITY);
    }

    #[test]
    fn inverse_against_closed_form_inverses() {
        // Independent inverses solved by hand for three variants.
        let c = Modulus::constant_one();
        for &w in &[0.5, 10.0, 1e4] {
            let z = c.hinv_log(w).unwrap();
            assert!((z - (1.0 + w)).abs() < 1e-12 * z);
        }
        let lp = Modulus::log_power(0.5).unwrap();
        for &w in &[0.5, 10.0, 1e4] {
            let z = lp.hinv_log(w).unwrap();
            let expect = (1.0 + 0.5 * w).powi(2);
            assert!((z - expect).abs() < 1e-12 * expect);
        }
        let pw = Modulus::power_law(-1.0).unwrap();
        for &w in &[0.5, 10.0, 1e4] {
            let tau = pw.hinv(w).unwrap();
            let expect = 1.0 / (w + std::f64::consts::E);
            assert!((tau - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn inverse_edge_cases() {
        let m = Modulus::log_power(0.5).unwrap();
        assert_eq!(m.hinv(0.0).unwrap(), m.tau0());
        // z = (1 + 0.5·1e4)² ≈ 2.5e7 is far below f64::MIN_POSITIVE.
        match m.hinv(1e4) {
            Err(Error::Underflow { log_value }) => {
                assert!((log_value + 5001.0f64.powi(2)).abs() < 1e-4);
            }
            other => panic!("expected underflow, got {other:?}"),
        }
        let dini = Modulus::log_power(2.0).unwrap();
        assert!(matches!(dini.hinv(1.5), Err(Error::Domain(_))));
        assert!(dini.hinv(0.5).is_ok());
        // Negative ω uses the continuation above τ₀.
        let c = Modulus::constant_one();
        assert!((c.hinv_log(-0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(idx in 0usize..10, f in -6.0f64..0.0) {
            let m = &catalogue()[idx];
            let tau = m.tau0() * 10f64.powf(f);
            let w = m.h(tau).unwrap();
            let back = m.hinv(w).unwrap();
            prop_assert!(((back - tau) / tau).abs() < 1e-8, "{}: {tau:e} -> {w} -> {back:e}", m.name());
        }

        #[test]
        fn h_is_strictly_decreasing(idx in 0usize..10, f in -6.0f64..-0.01) {
            let m = &catalogue()[idx];
            let t1 = m.tau0() * 10f64.powf(f);
            let t2 = t1 * 1.01;
            prop_assert!(m.h(t1).unwrap() > m.h(t2).unwrap());
        }
    }
}
