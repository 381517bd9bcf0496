//! The test function `Ψ(t, x) = (1 + t^{2α} + |x|^{2β})^{−r₀}` and the
//! numerical check of its weighted fractional-Laplacian bounds.
//!
//! Derivatives are exact: every expression is a finite sum of terms
//! `c · W^{−a} r^b t^e` with `W = 1 + t^{2α} + r^{2β}` and `r = |x|`.

use rayon::prelude::*;
use serde::Serialize;

use super::{Decay, Field, SingularFracLap};
use crate::error::{Error, Result};
use crate::params::{frac, is_integer};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    c: f64,
    a: f64,
    b: f64,
    e: f64,
}

/// Finite sum of `c · W^{−a} r^b t^e` terms, radial in `x ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialExpr {
    alpha: f64,
    beta: f64,
    dim: usize,
    terms: Vec<Term>,
}

impl RadialExpr {
    fn with_terms(&self, terms: Vec<Term>) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            if t.c == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|m| m.a == t.a && m.b == t.b && m.e == t.e) {
                Some(m) => m.c += t.c,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.c != 0.0);
        Self { terms: merged, ..*self }
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        let w = 1.0 + t.powf(2.0 * self.alpha) + r.powf(2.0 * self.beta);
        self.terms.iter().map(|k| k.c * w.powf(-k.a) * r.powf(k.b) * t.powf(k.e)).sum()
    }

    /// `∂_t`
    pub fn dt(&self) -> Self {
        let mut out = Vec::new();
        for k in &self.terms {
            out.push(Term { c: -k.c * k.a * 2.0 * self.alpha, a: k.a + 1.0, b: k.b, e: k.e + 2.0 * self.alpha - 1.0 });
            out.push(Term { c: k.c * k.e, a: k.a, b: k.b, e: k.e - 1.0 });
        }
        self.with_terms(out)
    }

    /// `∂_r`
    pub fn dr(&self) -> Self {
        let mut out = Vec::new();
        for k in &self.terms {
            out.push(Term { c: -k.c * k.a * 2.0 * self.beta, a: k.a + 1.0, b: k.b + 2.0 * self.beta - 1.0, e: k.e });
            out.push(Term { c: k.c * k.b, a: k.a, b: k.b - 1.0, e: k.e });
        }
        self.with_terms(out)
    }

    /// `Δ = ∂_r² + (n − 1) r⁻¹ ∂_r` on radial functions.
    pub fn laplacian(&self) -> Self {
        let d1 = self.dr();
        let mut terms = d1.dr().terms;
        let nm1 = (self.dim - 1) as f64;
        terms.extend(d1.terms.iter().map(|k| Term { c: nm1 * k.c, b: k.b - 1.0, ..*k }));
        self.with_terms(terms)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.with_terms(self.terms.iter().map(|k| Term { c: k.c * factor, ..*k }).collect())
    }

    /// Decay bound valid for `t ∈ [0, 1]`: `W ≥ 2^{1−2β}(1 + r)^{2β}` gives
    /// `|W^{−a} r^b| ≤ 2^{(2β−1)a} (1 + r)^{−(2βa − b)}`.
    pub fn decay_bound(&self, t: f64) -> Decay {
        let mut bound = 0.0;
        let mut exponent = f64::INFINITY;
        for k in &self.terms {
            bound += k.c.abs() * 2f64.powf((2.0 * self.beta - 1.0) * k.a) * t.powf(k.e);
            exponent = exponent.min(2.0 * self.beta * k.a - k.b);
        }
        Decay::Polynomial { bound, exponent }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `Ψ(t, x) = (1 + t^{2α₂} + |x|^{2β₂})^{−r₀}` on `ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionPsi {
    pub alpha2: f64,
    pub beta2: f64,
    pub r0: f64,
    pub dim: usize,
}

impl TestFunctionPsi {
    pub fn new(alpha2: f64, beta2: f64, r0: f64, dim: usize) -> Result<Self> {
        if !(alpha2 >= 1.0) {
            return Err(Error::InvalidParams(format!("alpha2 must be >= 1, got {alpha2}")));
        }
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidParams(format!("dimension {dim} not supported")));
        }
        if !(beta2 > 0.0 && r0 > dim as f64 / (2.0 * beta2)) {
            return Err(Error::InvalidParams(format!(
                "need r0 > n/(2 beta2); got r0 = {r0}, beta2 = {beta2}, n = {dim}"
            )));
        }
        Ok(Self { alpha2, beta2, r0, dim })
    }

    pub fn expr(&self) -> RadialExpr {
        RadialExpr {
            alpha: self.alpha2,
            beta: self.beta2,
            dim: self.dim,
            terms: vec![Term { c: 1.0, a: self.r0, b: 0.0, e: 0.0 }],
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.expr().eval(t, r)
    }

    /// `1 + t^{2α₂} + |x|^{2β₂}`
    pub fn weight_base(&self, t: f64, r: f64) -> f64 {
        1.0 + t.powf(2.0 * self.alpha2) + r.powf(2.0 * self.beta2)
    }

    /// Decay exponent of the weight in the bound for `(−Δ)^{s̄} ∂_t^j Ψ`.
    pub fn r1(&self, sbar: f64) -> f64 {
        if is_integer(sbar) {
            self.r0 + sbar.round() / self.beta2
        } else {
            (self.dim as f64 + 2.0 * frac(sbar)) / (2.0 * self.beta2)
        }
    }
}

struct Slice<'a> {
    expr: &'a RadialExpr,
    t: f64,
}

impl Field for Slice<'_> {
    fn dim(&self) -> usize {
        self.expr.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.expr.eval(self.t, r)
    }

    fn decay(&self) -> Decay {
        self.expr.decay_bound(self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma42Report {
    pub sbar: f64,
    pub j: u32,
    pub r1: f64,
    /// `sup |(−Δ)^{s̄} ∂_t^j Ψ| · (1 + t^{2α₂} + |x|^{2β₂})^{r₁}` over the grid.
    pub constant: f64,
    pub argmax: (f64, f64),
    pub points: usize,
    /// Grid points where the operator could not be evaluated or was not finite.
    pub violations: Vec<(f64, f64)>,
}

impl Lemma42Report {
    pub fn pass(&self) -> bool {
        self.violations.is_empty() && self.constant.is_finite()
    }
}

/// Evaluate `(−Δ)^{s̄} ∂_t^j Ψ` on the `(t, x₁)` grid (other coordinates zero)
/// as `(−Δ)^{{s̄}}` applied to the exact `(−Δ)^{[s̄]} ∂_t^j Ψ`, and return the
/// supremum of the weighted values.
pub fn verify_lemma42(
    psi: &TestFunctionPsi,
    sbar: f64,
    j: u32,
    ts: &[f64],
    xs: &[f64],
    tol: f64,
) -> Result<Lemma42Report> {
    if !(sbar >= 0.0 && sbar.is_finite()) {
        return Err(Error::InvalidOrder(sbar));
    }
    if j > 1 {
        return Err(Error::InvalidParams(format!("time derivative order must be 0 or 1, got {j}")));
    }
    if psi.beta2 < sbar.floor() + 2.0 {
        return Err(Error::InvalidParams(format!(
            "beta2 = {} must be >= [sbar] + 2 = {}",
            psi.beta2,
            sbar.floor() + 2.0
        )));
    }
    if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParams("time samples must lie in [0, 1]".into()));
    }
    let mut expr = psi.expr();
    if j == 1 {
        expr = expr.dt();
    }
    let whole = if is_integer(sbar) { sbar.round() as u32 } else { sbar.floor() as u32 };
    for _ in 0..whole {
        expr = expr.laplacian().scale(-1.0);
    }
    let fractional = if is_integer(sbar) { 0.0 } else { frac(sbar) };
    let op = if fractional > 0.0 { Some(SingularFracLap::new(fractional, psi.dim)?) } else { None };
    let r1 = psi.r1(sbar);

    let grid: Vec<(f64, f64)> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
    let results: Vec<((f64, f64), Option<f64>)> = grid
        .par_iter()
        .map(|&(t, x)| {
            let mut point = vec![0.0; psi.dim];
            point[0] = x;
            let value = match &op {
                None => Some(expr.eval(t, x.abs())),
                Some(op) => op.eval(&Slice { expr: &expr, t }, &point, tol).ok().map(|v| v.value),
            };
            let weighted = value.map(|v| v.abs() * psi.weight_base(t, x.abs()).powf(r1));
            ((t, x), weighted.filter(|w| w.is_finite()))
        })
        .collect();

    let mut constant = 0.0;
    let mut argmax = (0.0, 0.0);
    let mut violations = Vec::new();
    for (pt, w) in results {
        match w {
            Some(w) if w > constant => {
                constant = w;
                argmax = pt;
            }
            Some(_) => {}
            None => violations.push(pt),
        }
    }
    Ok(Lemma42Report { sbar, j, r1, constant, argmax, points: grid.len(), violations })
}
