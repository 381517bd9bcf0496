//! `sigmalab`: experiments on critical semilinear sigma-evolution equations.

// Negated comparisons are used on purpose so that NaN fails the checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{ExperimentConfig, RawConfig};
use error::CliError;

/// Environment variable bounding the worker pool.
const WORKERS_ENV: &str = "SIGMALAB_WORKERS";

#[derive(Parser)]
#[command(name = "sigmalab", version, about = "Critical semilinear sigma-evolution experiments", after_help = config::keys_help())]
struct Cli {
    /// Exit with status 4 when the command's acceptance check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dini verdict of the modulus and admissibility of the parameters.
    Classify {
        /// Compact modulus spec, e.g. `log:0.5` or `power:-1@0.2`.
        spec: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Lifespan bounds.
    #[command(subcommand)]
    Lifespan(LifespanCmd),
    /// Fractional Laplacian checks.
    #[command(subcommand)]
    Fraclap(FraclapCmd),
    /// Linear kernel checks.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Integrate one solution and write its trajectory as NDJSON.
    Solve(Common),
    /// Measured lifespans over the `eps_list` data sizes, as CSV.
    Sweep(Common),
    /// Blow-up diagnostics of a stored trajectory.
    #[command(subcommand)]
    Diag(DiagCmd),
}

#[derive(Subcommand)]
enum LifespanCmd {
    /// Predicted `ln T` bounds for every entry of `eps_list`.
    Predict(Common),
}

#[derive(Subcommand)]
enum FraclapCmd {
    /// Singular integral against the Fourier oracle on the standard Gaussian.
    Check(Common),
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Fitted decay rate of the linear solution against its target.
    Decay(Common),
}

#[derive(Subcommand)]
enum DiagCmd {
    /// `y(R)`, `Y(R)` and the differential-inequality ratios.
    YFunctional {
        /// NDJSON trajectory written by `solve`.
        #[arg(long)]
        trajectory: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key=value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    modulus: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Common {
    /// File, then `--set` overrides, then the named flags, on top of `base`.
    fn resolve(&self, mut base: RawConfig, extra: &[(&str, &str)]) -> Result<ExperimentConfig, CliError> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            base.merge(RawConfig::parse(&text, &path.display().to_string())?);
        }
        let named = [
            ("sigma", &self.sigma),
            ("delta", &self.delta),
            ("n", &self.n),
            ("modulus", &self.modulus),
            ("q", &self.q),
            ("eps", &self.eps),
        ];
        let flags = named.iter().filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")));
        let extra = extra.iter().map(|(k, v)| format!("{k}={v}"));
        for (i, pair) in self.set.iter().cloned().chain(flags).chain(extra).enumerate() {
            base.apply_override(&pair, i)?;
        }
        Ok(base.resolve()?)
    }
}

fn init_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_workers()?;
    let (outcome, output): (Outcome, Option<&Path>) = match &cli.command {
        Command::Classify { spec, common } => {
            let extra: Vec<(&str, &str)> = spec.iter().map(|s| ("modulus", s.as_str())).collect();
            let cfg = common.resolve(RawConfig::default(), &extra)?;
            (commands::classify(&cfg)?, common.output.as_deref())
        }
        Command::Lifespan(LifespanCmd::Predict(c)) => {
            (commands::lifespan_predict(&c.resolve(RawConfig::default(), &[])?)?, c.output.as_deref())
        }
        Command::Fraclap(FraclapCmd::Check(c)) => {
            (commands::fraclap_check(&c.resolve(RawConfig::default(), &[])?)?, c.output.as_deref())
        }
        Command::Kernel(KernelCmd::Decay(c)) => {
            (commands::kernel_decay(&c.resolve(RawConfig::default(), &[])?)?, c.output.as_deref())
        }
        Command::Solve(c) => (commands::solve(&c.resolve(RawConfig::default(), &[])?)?, c.output.as_deref()),
        Command::Sweep(c) => (commands::sweep(&c.resolve(RawConfig::default(), &[])?)?, c.output.as_deref()),
        Command::Diag(DiagCmd::YFunctional { trajectory, common }) => {
            let text = std::fs::read_to_string(trajectory)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", trajectory.display())))?;
            let (base, traj) = commands::read_trajectory(&text, &trajectory.display().to_string())?;
            let cfg = common.resolve(base, &[])?;
            (commands::diag_y_functional(&cfg, &traj)?, common.output.as_deref())
        }
    };
    output::emit(&outcome.text, output)?;
    match outcome.failure {
        Some(reason) if cli.strict => Err(CliError::Strict(reason)),
        Some(reason) => {
            eprintln!("sigmalab: warning: {reason}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn main() {
    let code = match run(Cli::parse()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sigmalab: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
