//! Numerical laboratory for semilinear σ-evolution equations with fractional
//! structural damping,
//!
//! ```text
//! u_tt + (−Δ)^σ u + (−Δ)^δ u_t = |u|^{p_c} μ(|u|),   u(0) = ε u₀,  u_t(0) = ε u₁,
//! ```
//!
//! where `μ` is a modulus of continuity. The crate covers the critical
//! exponent and related scalars, a catalogue of moduli with the auxiliary
//! function `H`, two independent fractional Laplacians, the linear kernels,
//! a pseudo-spectral solver with blow-up detection, and the blow-up
//! test-function diagnostics.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diag;
pub mod error;
pub mod fraclap;
pub mod kernels;
pub mod moduli;
pub mod params;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use diag::{Calibration, InequalityReport, TestFunctionFamily, YFunctional};
pub use error::{Error, Result};
pub use kernels::{Branch, KernelValues, PropagatorTable};
pub use moduli::{DiniVerdict, LifespanConstants, LifespanPrediction, Modulus, ModulusKind};
pub use params::{Admissibility, DampingRegime, EquationParams, ExtReal};
pub use solver::{DataProfile, LifespanSample, NormRecord, RunStatus, SolverConfig, TrajectoryRecord};
