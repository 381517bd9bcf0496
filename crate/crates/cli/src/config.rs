//! Flat `key = value` experiment configuration.
//!
//! Lines hold one or more whitespace-separated `key=value` pairs; `#` starts a
//! comment. Every key must appear in [`SCHEMA`]; values are validated when the
//! configuration is resolved.

use std::collections::BTreeMap;
use std::fmt;

use sigmalab_core::kernels::NormKind;
use sigmalab_core::solver::SweepConfig;
use sigmalab_core::{DataProfile, EquationParams, LifespanConstants, Modulus, SolverConfig};

/// Known keys with their defaults and a one-line description.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("sigma", "1", "order sigma >= 1 of the elliptic term"),
    ("delta", "0", "damping order in [0, sigma]"),
    ("n", "1", "space dimension"),
    ("epsilon0", "0.5", "s0 when sigma and delta are both integers"),
    ("modulus", "constant", "constant | power | logpow | iterlog, or a compact spec such as log:0.5@0.3"),
    ("a", "", "exponent of the power modulus"),
    ("gamma", "", "exponent of the (iterated) log modulus"),
    ("k", "", "depth of the iterated log modulus"),
    ("tau0", "", "threshold tau0 of the modulus"),
    ("eps", "0.1", "data size for solve and diag"),
    ("eps_list", "0.4,0.3,0.2,0.15,0.1", "strictly decreasing data sizes for sweep and lifespan"),
    ("profile", "gaussian-u1:1", "data profile: gaussian-u1:<w>, gaussian-u0:<w> or constant:<u0>:<u1>"),
    ("npts", "1024", "grid points per axis (power of two)"),
    ("half_len", "64", "half-length of the periodic box"),
    ("dt0", "0.05", "initial time step"),
    ("dt_floor", "1e-10", "smallest time step"),
    ("blowup_threshold", "1e6", "sup-norm that declares blow-up"),
    ("dealias", "0.6666666666666666", "retained fraction of the spectrum"),
    ("t_max", "10000", "final time of a solver run"),
    ("record_stride", "5", "accepted steps between norm records"),
    ("snapshot_stride", "4", "norm records between field snapshots"),
    ("auto_box", "true", "size the box per eps from the predicted lifespan"),
    ("max_half_len", "4096", "largest automatic box half-length"),
    ("regrow_passes", "2", "reruns when the measured lifespan outgrows the box"),
    ("k1", "1", "lower-bound constant k1"),
    ("k2", "1", "lower-bound constant k2"),
    ("k_const", "1", "lower-bound constant k"),
    ("k1_tilde", "1", "upper-bound constant k1~"),
    ("k2_tilde", "1", "upper-bound constant k2~"),
    ("k_tilde", "1", "upper-bound constant k~"),
    ("q", "inf", "Lebesgue exponent of the decay fit (number or inf)"),
    ("decay_t_min", "1", "first time of the decay fit"),
    ("decay_t_max", "1000", "last time of the decay fit"),
    ("decay_samples", "25", "sample times of the decay fit"),
    ("decay_width", "2", "Gaussian width of the decay data"),
    ("s_list", "0.3,0.5,0.8", "fractional orders for fraclap check"),
    ("points", "9", "evaluation points in [-x_max, x_max]"),
    ("x_max", "3", "half-width of the evaluation interval"),
    ("quad_tol", "1e-9", "quadrature tolerance of the singular integral"),
    ("tol", "1e-3", "cross-validation tolerance used by --strict"),
    ("decay_tol", "0.15", "relative slope error accepted by --strict"),
    ("r_min", "1", "smallest R of the Y-functional grid"),
    ("r_max", "auto", "largest R (auto: half the last snapshot time)"),
    ("r_count", "24", "points of the geometric R grid"),
    ("c5", "1", "constant C5 of the differential inequality"),
    ("c_data", "auto", "data constant (auto: weighted integral of the data)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Source of the offending entry, such as `run.cfg:3` or `--set #1`.
    pub origin: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.origin, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Validated key set with its provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

fn is_known(key: &str) -> bool {
    SCHEMA.iter().any(|(k, _, _)| *k == key)
}

impl RawConfig {
    /// Parse file text; spaces around `=` are allowed, duplicate keys and unknown keys are errors.
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let origin = format!("{source}:{}", i + 1);
            let mut body = line.split('#').next().unwrap_or("").replace('\t', " ");
            while body.contains(" =") || body.contains("= ") {
                body = body.replace(" =", "=").replace("= ", "=");
            }
            for pair in body.split_whitespace() {
                cfg.insert(pair, &origin, false)?;
            }
        }
        Ok(cfg)
    }

    /// Build from stored `(key, value)` pairs such as a trajectory header.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
        source: &str,
    ) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (k, v) in pairs {
            cfg.insert(&format!("{k}={v}"), source, false)?;
        }
        Ok(cfg)
    }

    /// Apply a `key=value` override, replacing any earlier value.
    pub fn apply_override(&mut self, pair: &str, index: usize) -> Result<(), ConfigError> {
        self.insert(pair, &format!("--set #{}", index + 1), true)
    }

    fn insert(&mut self, pair: &str, origin: &str, replace: bool) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { origin: origin.to_string(), message };
        let (key, value) = pair.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{pair}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(format!("expected key=value, got '{pair}'")));
        }
        if !is_known(key) {
            return Err(err(format!("unknown key '{key}'")));
        }
        if !replace {
            if let Some((_, first)) = self.entries.get(key) {
                return Err(err(format!("duplicate key '{key}' (first set at {first})")));
            }
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin.to_string()));
        Ok(())
    }

    /// Overlay `other` on top of `self`.
    pub fn merge(&mut self, other: RawConfig) {
        self.entries.extend(other.entries);
    }

    /// Fill defaults and validate every value.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut values = BTreeMap::new();
        let mut origins = BTreeMap::new();
        for (key, default, _) in SCHEMA {
            match self.entries.get(*key) {
                Some((v, o)) => {
                    values.insert(key.to_string(), v.clone());
                    origins.insert(key.to_string(), o.clone());
                }
                None => {
                    values.insert(key.to_string(), default.to_string());
                    origins.insert(key.to_string(), "default".to_string());
                }
            }
        }
        let cfg = ExperimentConfig { values, origins };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolved configuration: every schema key with a value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
    origins: BTreeMap<String, String>,
}

impl ExperimentConfig {
    fn err(&self, key: &str, message: String) -> ConfigError {
        let origin = self.origins.get(key).cloned().unwrap_or_default();
        ConfigError { origin, message: format!("{key}: {message}") }
    }

    fn core_err(&self, key: &str, e: sigmalab_core::Error) -> ConfigError {
        self.err(key, e.to_string())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("schema key")
    }

    /// `(key, value)` pairs in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn opt(&self, key: &str) -> Option<&str> {
        let v = self.raw(key);
        (!v.is_empty() && v != "auto").then_some(v)
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.raw(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.err(key, format!("expected a finite number, got '{v}'")))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.opt(key) {
            None => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.raw(key);
        v.parse::<usize>().map_err(|_| self.err(key, format!("expected a non-negative integer, got '{v}'")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(self.err(key, format!("expected true or false, got '{v}'"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.raw(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(key, format!("bad list entry '{}'", s.trim())))
            })
            .collect()
    }

    pub fn params(&self) -> Result<EquationParams, ConfigError> {
        let n = self.usize("n")?;
        EquationParams::with_epsilon0(self.f64("sigma")?, self.f64("delta")?, n, self.f64("epsilon0")?)
            .map_err(|e| self.core_err("delta", e))
    }

    pub fn modulus(&self) -> Result<Modulus, ConfigError> {
        let name = self.raw("modulus");
        let need = |key: &str| -> Result<f64, ConfigError> {
            self.opt_f64(key)?.ok_or_else(|| self.err(key, format!("required by modulus '{name}'")))
        };
        let built = match name {
            "constant" | "one" => Ok(Modulus::constant_one()),
            "power" => Modulus::power_law(need("a")?),
            "logpow" | "log" => Modulus::log_power(need("gamma")?),
            "iterlog" => {
                let k = need("k")?;
                if k.fract() != 0.0 || k < 0.0 {
                    return Err(self.err("k", format!("depth must be a positive integer, got {k}")));
                }
                Modulus::iter_log_power(k as u32, need("gamma")?)
            }
            spec if spec.contains(':') => Modulus::from_spec(spec),
            other => return Err(self.err("modulus", format!("unknown modulus '{other}'"))),
        };
        let m = built.map_err(|e| self.core_err("modulus", e))?;
        match self.opt_f64("tau0")? {
            Some(t) => m.with_tau0(t).map_err(|e| self.core_err("tau0", e)),
            None => Ok(m),
        }
    }

    pub fn profile(&self) -> Result<DataProfile, ConfigError> {
        DataProfile::from_spec(self.raw("profile")).map_err(|e| self.core_err("profile", e))
    }

    pub fn solver(&self) -> Result<SolverConfig, ConfigError> {
        let npts = self.usize("npts")?;
        if npts < 8 || !npts.is_power_of_two() {
            return Err(self.err("npts", format!("must be a power of two >= 8, got {npts}")));
        }
        let cfg = SolverConfig {
            npts,
            half_len: self.f64("half_len")?,
            dt0: self.f64("dt0")?,
            dt_floor: self.f64("dt_floor")?,
            blowup_threshold: self.f64("blowup_threshold")?,
            dealias: self.f64("dealias")?,
            t_max: self.f64("t_max")?,
            record_stride: self.usize("record_stride")?,
            snapshot_stride: self.usize("snapshot_stride")?,
            ..SolverConfig::default()
        };
        cfg.validate().map_err(|e| self.core_err("npts", e))?;
        Ok(cfg)
    }

    pub fn constants(&self) -> Result<LifespanConstants, ConfigError> {
        let c = LifespanConstants {
            k1: self.f64("k1")?,
            k2: self.f64("k2")?,
            k: self.f64("k_const")?,
            k1_tilde: self.f64("k1_tilde")?,
            k2_tilde: self.f64("k2_tilde")?,
            k_tilde: self.f64("k_tilde")?,
        };
        let all = [c.k1, c.k2, c.k, c.k1_tilde, c.k2_tilde, c.k_tilde];
        if all.iter().any(|v| *v <= 0.0) {
            return Err(self.err("k1", "lifespan constants must be positive".into()));
        }
        Ok(c)
    }

    pub fn sweep(&self) -> Result<SweepConfig, ConfigError> {
        Ok(SweepConfig {
            solver: self.solver()?,
            profile: self.profile()?,
            constants: self.constants()?,
            auto_box: self.bool("auto_box")?,
            max_half_len: self.f64("max_half_len")?,
            regrow_passes: self.usize("regrow_passes")?,
        })
    }

    pub fn eps(&self) -> Result<f64, ConfigError> {
        let e = self.f64("eps")?;
        if e < 0.0 {
            return Err(self.err("eps", format!("must be >= 0, got {e}")));
        }
        Ok(e)
    }

    pub fn eps_list(&self) -> Result<Vec<f64>, ConfigError> {
        let l = self.list("eps_list")?;
        if l.iter().any(|e| *e <= 0.0) {
            return Err(self.err("eps_list", "entries must be positive".into()));
        }
        if l.windows(2).any(|w| w[1] >= w[0]) {
            return Err(self.err("eps_list", "must be strictly decreasing".into()));
        }
        Ok(l)
    }

    pub fn norm(&self) -> Result<NormKind, ConfigError> {
        match self.raw("q") {
            "inf" | "infinity" => Ok(NormKind::Infinity),
            _ => {
                let q = self.f64("q")?;
                if q < 1.0 {
                    return Err(self.err("q", format!("must be >= 1, got {q}")));
                }
                Ok(NormKind::Lq(q))
            }
        }
    }

    /// Check everything the subcommands may touch, so bad values fail before a run.
    fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.modulus()?;
        self.sweep()?;
        self.eps()?;
        self.eps_list()?;
        self.norm()?;
        for key in ["decay_t_min", "decay_t_max", "decay_width", "x_max", "quad_tol", "tol", "decay_tol", "r_min", "c5"]
        {
            if self.f64(key)? <= 0.0 {
                return Err(self.err(key, "must be positive".into()));
            }
        }
        for key in ["decay_samples", "points", "r_count"] {
            if self.usize(key)? < 2 {
                return Err(self.err(key, "must be at least 2".into()));
            }
        }
        for key in ["r_max", "c_data"] {
            if let Some(v) = self.opt_f64(key)? {
                if v <= 0.0 {
                    return Err(self.err(key, "must be positive".into()));
                }
            }
        }
        if self.list("s_list")?.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(self.err("s_list", "orders must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `--help` appendix listing every key with its default.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (key = default):\n");
    for (k, d, h) in SCHEMA {
        let d = if d.is_empty() { "unset" } else { d };
        out.push_str(&format!("  {k:<18} {d:<24} {h}\n"));
    }
    out
}
