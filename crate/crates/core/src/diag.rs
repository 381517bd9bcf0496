//! Blow-up test-function diagnostics: the weights `φ`, `ρ`, `Φ`, `ψ_R`, the
//! functional `Y(R) = ∫₀^R y(r) r⁻¹ dr` evaluated on solver trajectories, and
//! a numerical check of the differential inequality for `Y`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::params::EquationParams;
use crate::quad::{integrate_to_infinity, QuadOptions};
use crate::solver::{Nonlinearity, TrajectoryRecord};
use crate::spectral::Grid;

/// Parameters of the test-function family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionFamily {
    pub theta: f64,
    pub q0: f64,
    pub s0: f64,
    pub kappa: f64,
    pub p_c: f64,
    pub r2: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl TestFunctionFamily {
    /// Family with explicit `θ, r₂, β₀, β₁`, validated against the admissible set.
    pub fn new(p: &EquationParams, theta: f64, r2: f64, beta0: f64, beta1: f64) -> Result<Self> {
        let p_c = p.require_finite_pc()?;
        let (s0, q0) = p.s0_q0();
        let kappa = p.kappa();
        let theta_min = 1f64.max((p.sigma().floor() + 1.0) / kappa);
        let conj = p_c / (p_c - 1.0);
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(theta >= theta_min) {
            return bad(format!("theta must be >= {theta_min}, got {theta}"));
        }
        if !(r2 >= 2.0 * conj) {
            return bad(format!("r2 must be >= {}, got {r2}", 2.0 * conj));
        }
        if !(beta0 > 0.0 && beta0 < beta1) {
            return bad(format!("need 0 < beta0 < beta1, got {beta0}, {beta1}"));
        }
        let b0_max = (p_c - 1.0) / (2.0 * theta);
        let b1_max = s0 * (p_c - 1.0) / (theta * kappa);
        if !(beta0 < b0_max) {
            return bad(format!("beta0 must be < {b0_max}, got {beta0}"));
        }
        if !(beta1 < b1_max) {
            return bad(format!("beta1 must be < {b1_max}, got {beta1}"));
        }
        Ok(Self { theta, q0, s0, kappa, p_c, r2, beta0, beta1 })
    }

    /// `θ` and `r₂` at their lower bounds, `β₀, β₁` inside the admissible box.
    pub fn default_for(p: &EquationParams) -> Result<Self> {
        let p_c = p.require_finite_pc()?;
        let (s0, _) = p.s0_q0();
        let kappa = p.kappa();
        let theta = 1f64.max((p.sigma().floor() + 1.0) / kappa);
        let r2 = 2.0 * p_c / (p_c - 1.0);
        let beta1 = 0.5 * s0 * (p_c - 1.0) / (theta * kappa);
        let beta0 = 0.5 * ((p_c - 1.0) / (2.0 * theta)).min(beta1) / 2.0;
        Self::new(p, theta, r2, beta0, beta1)
    }

    fn base(&self, t: f64, x: f64) -> f64 {
        t.powf(2.0 * self.theta) + x.abs().powf(2.0 * self.theta * self.kappa)
    }

    /// `φ(t, x) = (1 + t^{2θ} + |x|^{2θκ})^{−q₀/(2θκ)}`, with `x` given by its norm.
    pub fn phi(&self, t: f64, x: f64) -> f64 {
        (1.0 + self.base(t, x)).powf(-self.q0 / (2.0 * self.theta * self.kappa))
    }

    /// Quintic cut-off: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, `C²` at both knots.
    pub fn rho(&self, t: f64) -> f64 {
        if t <= 0.5 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let s = 2.0 * t - 1.0;
            1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0)
        }
    }

    /// `Φ(t, x) = (t^{2θ} + |x|^{2θκ})^{β₀} / (1 + t^{2θ} + |x|^{2θκ})^{β₁}`.
    pub fn capital_phi(&self, t: f64, x: f64) -> f64 {
        let b = self.base(t, x);
        if b == 0.0 {
            return 0.0;
        }
        (self.beta0 * b.ln() - self.beta1 * b.ln_1p()).exp()
    }

    pub fn psi(&self, t: f64, x: f64) -> f64 {
        let r = self.rho(t);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.r2) * self.phi(t, x)
    }

    /// `ψ_R(t, x) = ψ(t/R, x/R^{1/κ})`.
    pub fn psi_r(&self, r: f64, t: f64, x: f64) -> f64 {
        self.psi(t / r, x * r.powf(-1.0 / self.kappa))
    }

    pub fn capital_phi_r(&self, r: f64, t: f64, x: f64) -> f64 {
        self.capital_phi(t / r, x * r.powf(-1.0 / self.kappa))
    }

    /// Bound `sup ∫₀^R Φ_r(t, x) r⁻¹ dr = B(β₀, β₁ − β₀)/(2θ)`, by quadrature.
    pub fn phi_integral_bound(&self) -> f64 {
        // τ = w^{1/β₀} removes the endpoint singularity of τ^{β₀−1}
        let (b0, b1) = (self.beta0, self.beta1);
        let q = integrate_to_infinity(|w: f64| (1.0 + w.powf(1.0 / b0)).powf(-b1), 0.0, QuadOptions::new(1e-14, 1e-12));
        q.value / b0 / (2.0 * self.theta)
    }
}

/// Geometric grid of `count` points on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::DegenerateGrid(format!("need 0 < lo < hi and count >= 2, got {lo}, {hi}, {count}")));
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { hi } else { lo * (ratio * i as f64).exp() }).collect())
}

/// `∫ (u₀ + u₁) ⟨x⟩^{−q₀} dx` on the grid.
pub fn data_constant(grid: &Grid, u0: &[f64], u1: &[f64], q0: f64) -> f64 {
    (0..grid.len()).map(|i| (u0[i] + u1[i]) * (1.0 + grid.radius(i).powi(2)).powf(-0.5 * q0)).sum::<f64>()
        * grid.cell_volume()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YFunctional {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub big_y: Vec<f64>,
    /// `I_R = ∬ g(u) ψ_R dx dt`.
    pub i_r: Vec<f64>,
    /// Smallest `C` with `Y ≤ C·I_R` on the grid.
    pub c_fit: f64,
    /// Closed-form bound the fitted constant must respect.
    pub c_bound: f64,
    pub snapshots: usize,
    pub max_spacing: f64,
}

impl YFunctional {
    pub fn is_monotone(&self) -> bool {
        self.big_y.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Largest snapshot spacing allowed, as a fraction of the smallest `R`.
pub const SPACING_FRACTION: f64 = 0.125;

/// `y(r)`, `Y(R)` and `I_R` on `r_grid` from the trajectory snapshots: trapezoid
/// in time over snapshot times, grid sum in space. The head `∫₀^{r₀} y/r` is
/// closed with the local power law of `y`.
pub fn compute_y(
    traj: &TrajectoryRecord,
    p: &EquationParams,
    m: &Modulus,
    fam: &TestFunctionFamily,
    r_grid: &[f64],
) -> Result<YFunctional> {
    if r_grid.len() < 2 || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateGrid("R grid must be positive and strictly increasing".into()));
    }
    let grid = traj.grid()?;
    let nl = Nonlinearity::new(p, m)?;
    let snaps = &traj.snapshots;
    let r_max = *r_grid.last().expect("non-empty");
    let t_last = snaps.last().map_or(0.0, |s| s.t);
    if snaps.len() < 2 || snaps[0].t > 0.0 || t_last < r_max {
        return Err(Error::InsufficientSnapshots(format!("snapshots must cover [0, {r_max}], last at {t_last}")));
    }
    let used = snaps.iter().position(|s| s.t >= r_max).expect("covered") + 1;
    let max_spacing = snaps[..used].windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    if max_spacing > SPACING_FRACTION * r_grid[0] {
        return Err(Error::InsufficientSnapshots(format!(
            "snapshot spacing {max_spacing} exceeds {} for R >= {}",
            SPACING_FRACTION * r_grid[0],
            r_grid[0]
        )));
    }
    let radii: Vec<f64> = (0..grid.len()).map(|i| grid.radius(i)).collect();
    let g: Vec<Vec<f64>> = snaps[..used].iter().map(|s| s.values.iter().map(|&u| nl.eval(u)).collect()).collect();
    let times: Vec<f64> = snaps[..used].iter().map(|s| s.t).collect();
    let dv = grid.cell_volume();
    let integral = |r: f64, with_phi: bool| -> f64 {
        let slice: Vec<f64> = times
            .iter()
            .zip(&g)
            .map(|(&t, gk)| {
                if t >= r {
                    return 0.0;
                }
                gk.iter()
                    .zip(&radii)
                    .filter(|(v, _)| **v != 0.0)
                    .map(|(v, &x)| {
                        let w = fam.psi_r(r, t, x);
                        if with_phi {
                            v * w * fam.capital_phi_r(r, t, x)
                        } else {
                            v * w
                        }
                    })
                    .sum::<f64>()
                    * dv
            })
            .collect();
        times.windows(2).zip(slice.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
    };
    let (y, i_r): (Vec<f64>, Vec<f64>) = r_grid.par_iter().map(|&r| (integral(r, true), integral(r, false))).unzip();
    let mut big_y = Vec::with_capacity(r_grid.len());
    let slope = (y[1] / y[0]).ln() / (r_grid[1] / r_grid[0]).ln();
    big_y.push(if y[0] > 0.0 && slope.is_finite() && slope > 0.0 { y[0] / slope } else { 0.0 });
    for k in 1..r_grid.len() {
        let dl = (r_grid[k] / r_grid[k - 1]).ln();
        big_y.push(big_y[k - 1] + 0.5 * dl * (y[k] + y[k - 1]));
    }
    let c_fit = big_y.iter().zip(&i_r).filter(|(_, i)| **i > 0.0).map(|(yy, i)| yy / i).fold(0.0, f64::max);
    Ok(YFunctional {
        r: r_grid.to_vec(),
        y,
        big_y,
        i_r,
        c_fit,
        c_bound: fam.phi_integral_bound(),
        snapshots: used,
        max_spacing,
    })
}

/// Calibration inputs `C₅` and `C_{u₀,u₁}` of the inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub c5: f64,
    pub c_data: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { c5: 1.0, c_data: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityRow {
    pub r: f64,
    pub y: f64,
    pub big_y: f64,
    pub y_prime: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub rows: Vec<InequalityRow>,
    /// Minimum ratio over the rows with `R` in the requested window.
    pub c_hat: f64,
    /// Smallest grid `R` from which every ratio is positive.
    pub r_delta: Option<f64>,
    /// `Y′` vanished at every interior point.
    pub degenerate: bool,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.c_hat > 0.0
    }
}

/// Minimum of `Y′(R) / (R^{n/κ} g[R^{−(n−min{2δ,σ})/κ}(C₅ Y(R) + C ε)])` over the
/// interior points in `[r_lo, r_hi]`; `Y′` by three-point differences.
pub fn check_differential_inequality(
    yf: &YFunctional,
    p: &EquationParams,
    m: &Modulus,
    eps: f64,
    cal: &Calibration,
    r_lo: f64,
    r_hi: f64,
) -> Result<InequalityReport> {
    let k = yf.r.len();
    if k < 10 {
        return Err(Error::DegenerateGrid(format!("need at least 10 R points, got {k}")));
    }
    let nl = Nonlinearity::new(p, m)?;
    let dim = p.dim();
    let decay = p.effective_dim() / p.kappa();
    let rows: Vec<InequalityRow> = (1..k - 1)
        .map(|i| {
            let (r0, r1, r2) = (yf.r[i - 1], yf.r[i], yf.r[i + 1]);
            let (hm, hp) = (r1 - r0, r2 - r1);
            let (ym, yc, yp) = (yf.big_y[i - 1], yf.big_y[i], yf.big_y[i + 1]);
            let y_prime = (hm * hm * (yp - yc) + hp * hp * (yc - ym)) / (hm * hp * (hm + hp));
            let arg = r1.powf(-decay) * (cal.c5 * yc + cal.c_data * eps);
            let rhs = r1.powf(dim / p.kappa()) * nl.eval(arg);
            let ratio = if rhs > 0.0 { y_prime / rhs } else { f64::NAN };
            InequalityRow { r: r1, y: yf.y[i], big_y: yc, y_prime, rhs, ratio }
        })
        .collect();
    let degenerate = rows.iter().all(|r| r.y_prime == 0.0);
    let window: Vec<&InequalityRow> = rows.iter().filter(|r| r.r >= r_lo && r.r <= r_hi).collect();
    if window.is_empty() {
        return Err(Error::DegenerateGrid(format!("no interior R point in [{r_lo}, {r_hi}]")));
    }
    let c_hat = window.iter().map(|r| if r.ratio.is_nan() { 0.0 } else { r.ratio }).fold(f64::INFINITY, f64::min);
    let r_delta = rows.iter().rposition(|r| !(r.ratio > 0.0)).map_or(Some(rows[0].r), |i| rows.get(i + 1).map(|r| r.r));
    Ok(InequalityReport { rows, c_hat, r_delta, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::LifespanConstants;
    use crate::solver::{run_to_blowup, DataProfile, Snapshot, SolverConfig};
    use proptest::prelude::*;

    fn wave() -> EquationParams {
        EquationParams::new(1.0, 0.0, 1).unwrap()
    }

    #[test]
    fn closed_forms_at_the_origin() {
        let fam = TestFunctionFamily::default_for(&wave()).unwrap();
        assert_eq!(fam.phi(0.0, 0.0), 1.0);
        assert_eq!(fam.capital_phi(0.0, 0.0), 0.0);
        assert_eq!(fam.rho(0.25), 1.0);
        assert_eq!(fam.rho(2.0), 0.0);
        assert_eq!(fam.psi_r(3.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn defaults_sit_inside_the_admissible_box() {
        for (s, d, n) in [(1.0, 0.0, 1), (1.0, 0.25, 1), (1.5, 1.0, 2), (1.0, 0.5, 2)] {
            let p = EquationParams::new(s, d, n).unwrap();
            let fam = TestFunctionFamily::default_for(&p).unwrap();
            assert!(fam.beta0 < fam.beta1);
            assert!((fam.r2 - 2.0 * fam.p_c / (fam.p_c - 1.0)).abs() < 1e-15);
        }
        let p = wave();
        assert!(TestFunctionFamily::new(&p, 0.5, 3.0, 0.05, 0.2).is_err());
        assert!(TestFunctionFamily::new(&p, 1.0, 2.0, 0.05, 0.2).is_err());
        assert!(TestFunctionFamily::new(&p, 1.0, 3.0, 0.2, 0.1).is_err());
        assert!(TestFunctionFamily::new(&p, 1.0, 3.0, 0.05, 0.6).is_err());
        assert!(TestFunctionFamily::new(&p, 1.0, 3.0, 0.05, 0.2).is_ok());
    }

    #[test]
    fn cutoff_is_c2_at_the_knots() {
        let fam = TestFunctionFamily::default_for(&wave()).unwrap();
        let h = 1e-5;
        for knot in [0.5, 1.0] {
            let d1 = |t: f64| (fam.rho(t + h) - fam.rho(t - h)) / (2.0 * h);
            let d2 = |t: f64| (fam.rho(t + h) - 2.0 * fam.rho(t) + fam.rho(t - h)) / (h * h);
            assert!(d1(knot).abs() < 1e-6, "rho' at {knot}");
            assert!(d2(knot).abs() < 100.0 * h, "rho'' at {knot}");
            // one-sided second derivatives agree
            let left = d2(knot - 10.0 * h);
            let right = d2(knot + 10.0 * h);
            assert!((left - right).abs() < 1e4 * h, "{left} {right}");
        }
        let grid: Vec<f64> = (0..=200).map(|i| 0.5 + 0.0025 * i as f64).collect();
        assert!(grid.windows(2).all(|w| fam.rho(w[1]) <= fam.rho(w[0])));
    }

    #[test]
    fn integral_bound_matches_beta_function() {
        for (s, d, n) in [(1.0, 0.0, 1), (1.0, 0.25, 1), (1.5, 1.0, 2)] {
            let p = EquationParams::new(s, d, n).unwrap();
            let fam = TestFunctionFamily::default_for(&p).unwrap();
            let exact = statrs::function::beta::beta(fam.beta0, fam.beta1 - fam.beta0) / (2.0 * fam.theta);
            let got = fam.phi_integral_bound();
            assert!((got / exact - 1.0).abs() < 1e-9, "{s} {d} {n}: {got} {exact}");
        }
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1.0, 16.0, 5).unwrap();
        assert_eq!(g[0], 1.0);
        assert_eq!(g[4], 16.0);
        assert!((g[2] - 4.0).abs() < 1e-12);
        assert!(geometric_grid(0.0, 1.0, 3).is_err());
    }

    fn zero_trajectory(t_end: f64, dt: f64) -> TrajectoryRecord {
        let npts = 64;
        let steps = (t_end / dt).ceil() as usize;
        TrajectoryRecord {
            dim: 1,
            npts,
            half_len: 20.0,
            records: Vec::new(),
            snapshots: (0..=steps).map(|k| Snapshot { t: k as f64 * dt, values: vec![0.0; npts] }).collect(),
        }
    }

    #[test]
    fn zero_solution_gives_zero_functional() {
        let p = wave();
        let m = Modulus::constant_one();
        let fam = TestFunctionFamily::default_for(&p).unwrap();
        let r = geometric_grid(1.0, 8.0, 12).unwrap();
        let yf = compute_y(&zero_trajectory(10.0, 0.1), &p, &m, &fam, &r).unwrap();
        assert!(yf.big_y.iter().chain(&yf.y).chain(&yf.i_r).all(|v| *v == 0.0));
        let rep = check_differential_inequality(&yf, &p, &m, 0.1, &Calibration::default(), 1.0, 8.0).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.c_hat, 0.0);
        assert!(!rep.passed());
    }

    #[test]
    fn sparse_or_short_snapshots_are_rejected() {
        let p = wave();
        let m = Modulus::constant_one();
        let fam = TestFunctionFamily::default_for(&p).unwrap();
        let r = geometric_grid(1.0, 8.0, 12).unwrap();
        assert!(matches!(
            compute_y(&zero_trajectory(10.0, 0.5), &p, &m, &fam, &r),
            Err(Error::InsufficientSnapshots(_))
        ));
        assert!(matches!(
            compute_y(&zero_trajectory(5.0, 0.1), &p, &m, &fam, &r),
            Err(Error::InsufficientSnapshots(_))
        ));
        let short = geometric_grid(1.0, 8.0, 5).unwrap();
        let yf = compute_y(&zero_trajectory(10.0, 0.1), &p, &m, &fam, &short).unwrap();
        assert!(check_differential_inequality(&yf, &p, &m, 0.1, &Calibration::default(), 1.0, 8.0).is_err());
    }

    #[test]
    fn blow_up_run_satisfies_the_inequality() {
        let p = wave();
        let m = Modulus::constant_one();
        let cfg = SolverConfig {
            npts: 256,
            half_len: 32.0,
            t_max: 50.0,
            record_stride: 1,
            snapshot_stride: 1,
            ..SolverConfig::default()
        };
        let prof = DataProfile::GaussianVelocity { width: 1.0 };
        let (traj, sample) = run_to_blowup(&p, &m, 2.0, &prof, &cfg, &LifespanConstants::default()).unwrap();
        assert!(sample.blowup);
        let fam = TestFunctionFamily::default_for(&p).unwrap();
        let r = geometric_grid(0.5, 0.5 * sample.t_measured, 16).unwrap();
        let yf = compute_y(&traj, &p, &m, &fam, &r).unwrap();
        assert!(yf.is_monotone());
        assert!(yf.y.iter().all(|v| *v >= 0.0));
        assert!(yf.c_fit > 0.0 && yf.c_fit <= yf.c_bound, "{} {}", yf.c_fit, yf.c_bound);
        // three-point differences agree with the exact derivative y(R)/R
        let rep =
            check_differential_inequality(&yf, &p, &m, 2.0, &Calibration::default(), 0.5, r[r.len() - 1]).unwrap();
        for row in &rep.rows[2..] {
            assert!((row.y_prime / (row.y / row.r) - 1.0).abs() < 0.05, "R {}", row.r);
        }
        let base =
            check_differential_inequality(&yf, &p, &m, 2.0, &Calibration::default(), 1.0, r[r.len() - 1]).unwrap();
        assert!(base.passed());
        let doubled = Calibration { c5: 2.0, ..Calibration::default() };
        let more = check_differential_inequality(&yf, &p, &m, 2.0, &doubled, 1.0, r[r.len() - 1]).unwrap();
        assert!(more.c_hat <= base.c_hat);
    }

    proptest! {
        #[test]
        fn weights_are_bounded(t in 0.0..5.0f64, x in -50.0..50.0f64, r in 0.5..100.0f64) {
            let fam = TestFunctionFamily::default_for(&wave()).unwrap();
            let (phi, cphi) = (fam.phi(t, x), fam.capital_phi(t, x));
            prop_assert!(phi > 0.0 && phi <= 1.0);
            prop_assert!((0.0..=1.0).contains(&cphi));
            prop_assert!(fam.psi_r(r, t, x) <= 1.0);
        }

        #[test]
        fn psi_r_is_monotone(t in 0.0..5.0f64, x in 0.0..20.0f64, dt in 0.0..1.0f64, dx in 0.0..2.0f64, r in 0.5..20.0f64) {
            let fam = TestFunctionFamily::default_for(&wave()).unwrap();
            let v = fam.psi_r(r, t, x);
            prop_assert!(fam.psi_r(r, t + dt, x) <= v);
            prop_assert!(fam.psi_r(r, t, x + dx) <= v);
            prop_assert!(fam.psi_r(r, t, -x) == v);
        }

        #[test]
        fn r_integral_of_capital_phi_is_bounded(t in 0.0..10.0f64, x in 0.0..30.0f64, big_r in 0.5..50.0f64) {
            let fam = TestFunctionFamily::default_for(&wave()).unwrap();
            let bound = fam.phi_integral_bound();
            // ∫₀^R Φ_r dr/r with r = R e^{−s}
            let q = integrate_to_infinity(
                |s: f64| fam.capital_phi_r(big_r * (-s).exp(), t, x),
                0.0,
                QuadOptions::new(1e-12, 1e-9),
            );
            prop_assert!(q.value <= bound * (1.0 + 1e-6), "{} > {}", q.value, bound);
        }
    }
}
