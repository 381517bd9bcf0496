use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The requested value is below the smallest positive double. `log_value`
    /// carries the natural logarithm of the quantity that could not be represented.
    #[error("value underflows f64 (log value {log_value:.6e})")]
    Underflow { log_value: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("accuracy loss: achieved error {achieved:.3e} exceeds tolerance {requested:.3e}")]
    AccuracyLoss { achieved: f64, requested: f64 },

    #[error("fractional order {0} must be positive and non-integer")]
    InvalidOrder(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("periodic box too small: boundary indicator {fraction:.3e} exceeds {limit:.1e}")]
    BoxTooSmall { fraction: f64, limit: f64 },

    #[error("numerical failure at t = {time:.6e}: {message}")]
    NumericalFailure { time: f64, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
}

impl Error {
    /// Stable module-qualified code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "params.invalid",
            Error::Domain(_) => "moduli.domain",
            Error::Underflow { .. } => "moduli.underflow",
            Error::IntegrationFailure(_) => "quad.integration_failure",
            Error::AccuracyLoss { .. } => "fraclap.accuracy_loss",
            Error::InvalidOrder(_) => "fraclap.invalid_order",
            Error::GridMismatch => "spectral.grid_mismatch",
            Error::BoxTooSmall { .. } => "kernels.box_too_small",
            Error::NumericalFailure { .. } => "solver.numerical_failure",
            Error::InsufficientData(_) => "solver.insufficient_data",
            Error::InsufficientSnapshots(_) => "diag.insufficient_snapshots",
            Error::DegenerateGrid(_) => "diag.degenerate_grid",
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParams(_) | Error::InvalidOrder(_) | Error::GridMismatch)
    }
}
