//! Subcommand implementations. Each returns its rendered output and, when a
//! `--strict` assertion does not hold, the reason.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sigmalab_core::diag::{
    check_differential_inequality, compute_y, data_constant, geometric_grid, Calibration, TestFunctionFamily,
};
use sigmalab_core::fraclap::{c2s_constant, cross_validate_gaussian};
use sigmalab_core::kernels::{measure_decay, DecayConfig};
use sigmalab_core::moduli::predict_lifespan;
use sigmalab_core::solver::{fit_scaling, is_non_increasing, run_to_blowup, sweep_epsilon, ScalingModel};
use sigmalab_core::{LifespanSample, NormRecord, RunStatus, TrajectoryRecord};

use crate::config::{ExperimentConfig, RawConfig};
use crate::error::CliError;
use crate::output::{comment_header, config_map, csv_document, ndjson_line, SCHEMA_VERSION};

pub struct Outcome {
    pub text: String,
    pub failure: Option<String>,
}

impl Outcome {
    fn new(text: String, failure: Option<String>) -> Self {
        Self { text, failure }
    }
}

pub fn classify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let m = cfg.modulus()?;
    let dini = m.dini_classify();
    let adm = p.global_existence_admissible();
    let mut text = comment_header("classify", cfg);
    let lines = [
        ("modulus", m.name()),
        ("tau0", m.tau0().to_string()),
        ("verdict", format!("{:?}", dini.verdict)),
        ("confidence", dini.confidence.to_string()),
        ("p_c", p.critical_exponent().to_string()),
        ("kappa", p.kappa().to_string()),
        ("regime", p.regime().to_string()),
        ("global_existence_admissible", adm.admissible.to_string()),
        ("admissibility_reason", adm.reason.to_string()),
    ];
    for (k, v) in lines {
        text.push_str(&format!("{k}={v}\n"));
    }
    let failure = (dini.verdict == sigmalab_core::DiniVerdict::Indeterminate)
        .then(|| "Dini verdict is indeterminate".to_string());
    Ok(Outcome::new(text, failure))
}

#[derive(Serialize)]
struct PredictionRow {
    epsilon: f64,
    global_existence: bool,
    log_t_lower: f64,
    log_t_upper: f64,
    log_t_simplified: f64,
    closed_form_log_t: Option<f64>,
    formula_id: &'static str,
}

pub fn lifespan_predict(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let m = cfg.modulus()?;
    let k = cfg.constants()?;
    let rows = cfg
        .eps_list()?
        .into_iter()
        .map(|eps| {
            let pr = predict_lifespan(&p, &m, eps, &k)?;
            Ok(PredictionRow {
                epsilon: eps,
                global_existence: pr.global_existence,
                log_t_lower: pr.log_t_lower,
                log_t_upper: pr.log_t_upper,
                log_t_simplified: pr.log_t_simplified,
                closed_form_log_t: pr.closed_form_log_t,
                formula_id: pr.formula_id,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    // rows are ordered by decreasing ε
    let monotone =
        rows.windows(2).all(|w| !(w[1].log_t_lower < w[0].log_t_lower) && !(w[1].log_t_upper < w[0].log_t_upper));
    let failure = (!monotone).then(|| "predicted lifespans decrease as eps decreases".to_string());
    Ok(Outcome::new(csv_document("lifespan-predict", cfg, &[], &rows, &[])?, failure))
}

#[derive(Serialize)]
struct FracRow {
    s: f64,
    x: f64,
    c2s: f64,
    singular: f64,
    oracle: f64,
    rel_err: f64,
}

pub fn fraclap_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let dim = cfg.usize("n")?;
    let count = cfg.usize("points")?;
    let x_max = cfg.f64("x_max")?;
    let quad_tol = cfg.f64("quad_tol")?;
    let tol = cfg.f64("tol")?;
    let xs: Vec<f64> = (0..count).map(|i| -x_max + 2.0 * x_max * i as f64 / (count - 1) as f64).collect();
    let per_order = cfg
        .list("s_list")?
        .par_iter()
        .map(|&s| {
            let c2s = c2s_constant(s, dim)?;
            let pts = cross_validate_gaussian(s, dim, &xs, quad_tol)?;
            Ok(pts
                .into_iter()
                .map(|q| FracRow { s, x: q.x, c2s, singular: q.singular, oracle: q.oracle, rel_err: q.rel_err })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, sigmalab_core::Error>>()?;
    let rows: Vec<FracRow> = per_order.into_iter().flatten().collect();
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0_f64, f64::max);
    let trailer = [format!("max_rel_err={worst}")];
    let failure = (!(worst <= tol)).then(|| format!("max relative error {worst:.3e} exceeds tol {tol:.1e}"));
    Ok(Outcome::new(csv_document("fraclap-check", cfg, &[], &rows, &trailer)?, failure))
}

#[derive(Serialize)]
struct DecayRow {
    t: f64,
    norm: f64,
}

pub fn kernel_decay(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let dc = DecayConfig {
        t_min: cfg.f64("decay_t_min")?,
        samples: cfg.usize("decay_samples")?,
        width: cfg.f64("decay_width")?,
        ..DecayConfig::new(cfg.norm()?, cfg.f64("decay_t_max")?)
    };
    let fit = measure_decay(&p, &dc)?;
    let tol = cfg.f64("decay_tol")?;
    let rel = fit.relative_error();
    let rows: Vec<DecayRow> = fit.times.iter().zip(&fit.norms).map(|(&t, &norm)| DecayRow { t, norm }).collect();
    let preamble = [
        format!("slope={}", fit.slope),
        format!("target={}", fit.target),
        format!("rel_err={rel}"),
        format!("r2={}", fit.r2),
        format!("periodization={}", fit.periodization),
        format!("grid_npts={}", fit.npts),
        format!("grid_half_len={}", fit.half_len),
    ];
    let failure =
        (!(rel <= tol)).then(|| format!("decay slope {} is off target {} by {rel:.3}", fit.slope, fit.target));
    Ok(Outcome::new(csv_document("kernel-decay", cfg, &preamble, &rows, &[])?, failure))
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Line<'a> {
    Version { version: &'a str },
    Header { schema: u32, command: &'a str, config: BTreeMap<String, String> },
    Grid { dim: usize, npts: usize, half_len: f64 },
    Norms(&'a NormRecord),
    Snapshot { t: f64, values: &'a [f64] },
    Summary(&'a LifespanSample),
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let m = cfg.modulus()?;
    let (traj, sample) = run_to_blowup(&p, &m, cfg.eps()?, &cfg.profile()?, &cfg.solver()?, &cfg.constants()?)?;
    let mut out = String::new();
    ndjson_line(&mut out, &Line::Version { version: env!("CARGO_PKG_VERSION") })?;
    let header = Line::Header { schema: SCHEMA_VERSION, command: "solve", config: config_map(cfg) };
    ndjson_line(&mut out, &header)?;
    ndjson_line(&mut out, &Line::Grid { dim: traj.dim, npts: traj.npts, half_len: traj.half_len })?;
    for r in &traj.records {
        ndjson_line(&mut out, &Line::Norms(r))?;
    }
    for s in &traj.snapshots {
        ndjson_line(&mut out, &Line::Snapshot { t: s.t, values: &s.values })?;
    }
    ndjson_line(&mut out, &Line::Summary(&sample))?;
    let failure = if sample.status == RunStatus::Inconclusive {
        Some("run ended inconclusive".to_string())
    } else if sample.dt_floor_hit {
        Some("time step reached dt_floor".to_string())
    } else {
        None
    };
    Ok(Outcome::new(out, failure))
}

#[derive(Serialize)]
struct SweepRow {
    epsilon: f64,
    t_measured: f64,
    t_threshold: f64,
    blowup: bool,
    status: String,
    t_lower: Option<f64>,
    t_upper: Option<f64>,
    half_len: f64,
    npts: usize,
    dt_final: f64,
    dt_floor_hit: bool,
    amplification_half: f64,
    amplification_end: f64,
    error: Option<String>,
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let m = cfg.modulus()?;
    let samples = sweep_epsilon(&p, &m, &cfg.eps_list()?, &cfg.sweep()?)?;
    let rows: Vec<SweepRow> = samples
        .iter()
        .map(|s| SweepRow {
            epsilon: s.epsilon,
            t_measured: s.t_measured,
            t_threshold: s.t_threshold,
            blowup: s.blowup,
            status: s.status.to_string(),
            t_lower: s.prediction.as_ref().map(|pr| pr.t_lower()),
            t_upper: s.prediction.as_ref().map(|pr| pr.t_upper()),
            half_len: s.half_len,
            npts: s.npts,
            dt_final: s.dt_final,
            dt_floor_hit: s.dt_floor_hit,
            amplification_half: s.amplification.1,
            amplification_end: s.amplification.0,
            error: s.error.clone(),
        })
        .collect();
    let monotone = is_non_increasing(&samples);
    let mut trailer = vec![format!("non_increasing={monotone}")];
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.epsilon, s.t_measured)).collect();
    if let Ok(fit) = fit_scaling(&pairs, ScalingModel::PowerLaw) {
        trailer.push(format!("power_law_slope={} r2={}", fit.slope, fit.r2));
    }
    let failed: Vec<String> = samples.iter().filter_map(|s| s.error.clone()).collect();
    let failure = if !failed.is_empty() {
        Some(format!("{} sample(s) failed: {}", failed.len(), failed.join("; ")))
    } else if !monotone {
        Some("measured lifespans are not monotone in eps".to_string())
    } else {
        None
    };
    Ok(Outcome::new(csv_document("sweep", cfg, &[], &rows, &trailer)?, failure))
}

#[derive(Deserialize)]
struct GridLine {
    dim: usize,
    npts: usize,
    half_len: f64,
}

#[derive(Deserialize)]
struct SnapshotLine {
    t: f64,
    values: Vec<f64>,
}

/// Trajectory written by `solve`, with the configuration stored in its header.
pub fn read_trajectory(text: &str, source: &str) -> Result<(RawConfig, TrajectoryRecord), CliError> {
    let bad = |line: usize, msg: String| CliError::Numerical(format!("{source}:{line}: {msg}"));
    let mut config = None;
    let mut grid = None;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        let parse_err = |e: serde_json::Error| bad(i + 1, e.to_string());
        match v.get("kind").and_then(Value::as_str) {
            Some("header") => {
                if v.get("schema").and_then(Value::as_u64) != Some(SCHEMA_VERSION as u64) {
                    return Err(bad(i + 1, format!("unsupported schema, expected {SCHEMA_VERSION}")));
                }
                let map: BTreeMap<String, String> = serde_json::from_value(v["config"].clone()).map_err(parse_err)?;
                let origin = format!("{source}:{}", i + 1);
                config = Some(RawConfig::from_pairs(map.iter().map(|(k, v)| (k.as_str(), v.as_str())), &origin)?);
            }
            Some("grid") => grid = Some(serde_json::from_value::<GridLine>(v).map_err(parse_err)?),
            Some("norms") => records.push(serde_json::from_value::<NormRecord>(v).map_err(parse_err)?),
            Some("snapshot") => {
                let s = serde_json::from_value::<SnapshotLine>(v).map_err(parse_err)?;
                snapshots.push(sigmalab_core::solver::Snapshot { t: s.t, values: s.values });
            }
            Some("version") | Some("summary") => {}
            other => return Err(bad(i + 1, format!("unknown record kind {other:?}"))),
        }
    }
    let config = config.ok_or_else(|| CliError::Numerical(format!("{source}: missing header record")))?;
    let g = grid.ok_or_else(|| CliError::Numerical(format!("{source}: missing grid record")))?;
    Ok((config, TrajectoryRecord { dim: g.dim, npts: g.npts, half_len: g.half_len, records, snapshots }))
}

#[derive(Serialize)]
struct YRow {
    r: f64,
    y: f64,
    big_y: f64,
    i_r: f64,
    y_prime: Option<f64>,
    rhs: Option<f64>,
    ratio: Option<f64>,
}

pub fn diag_y_functional(cfg: &ExperimentConfig, traj: &TrajectoryRecord) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let m = cfg.modulus()?;
    let eps = cfg.eps()?;
    let fam = TestFunctionFamily::default_for(&p)?;
    let t_last = traj.snapshots.last().map_or(0.0, |s| s.t);
    let r_min = cfg.f64("r_min")?;
    let r_max = cfg.opt_f64("r_max")?.unwrap_or(0.5 * t_last);
    if !(r_max > r_min) {
        return Err(CliError::Config(format!("R window [{r_min}, {r_max}] is empty")));
    }
    let r_grid = geometric_grid(0.5 * r_min, r_max, cfg.usize("r_count")?)?;
    let yf = compute_y(traj, &p, &m, &fam, &r_grid)?;
    let c_data = match cfg.opt_f64("c_data")? {
        Some(c) => c,
        None => {
            let grid = traj.grid()?;
            let (u0, u1) = cfg.profile()?.sample(&grid, fam.q0);
            data_constant(&grid, &u0, &u1, fam.q0)
        }
    };
    let cal = Calibration { c5: cfg.f64("c5")?, c_data };
    let report = check_differential_inequality(&yf, &p, &m, eps, &cal, r_min, r_max)?;
    let rows: Vec<YRow> = (0..yf.r.len())
        .map(|k| {
            let row = report.rows.iter().find(|row| row.r == yf.r[k]);
            YRow {
                r: yf.r[k],
                y: yf.y[k],
                big_y: yf.big_y[k],
                i_r: yf.i_r[k],
                y_prime: row.map(|w| w.y_prime),
                rhs: row.map(|w| w.rhs),
                ratio: row.map(|w| w.ratio),
            }
        })
        .collect();
    let trailer = [
        format!("snapshots={} max_spacing={}", yf.snapshots, yf.max_spacing),
        format!("c_fit={} c_bound={}", yf.c_fit, yf.c_bound),
        format!("c_data={c_data} c5={}", cal.c5),
        format!("c_hat={} degenerate={}", report.c_hat, report.degenerate),
        format!("r_delta={}", report.r_delta.map_or("none".to_string(), |r| r.to_string())),
    ];
    let failure = if !report.passed() {
        Some(format!("differential inequality not confirmed (c_hat = {})", report.c_hat))
    } else if !(yf.c_fit <= yf.c_bound) {
        Some(format!("Y/I_R constant {} exceeds the bound {}", yf.c_fit, yf.c_bound))
    } else if !yf.is_monotone() {
        Some("Y is not monotone in R".to_string())
    } else {
        None
    };
    Ok(Outcome::new(csv_document("diag-y-functional", cfg, &[], &rows, &trailer)?, failure))
}
