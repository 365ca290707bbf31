use thiserror::Error;

/// Errors raised by dataset loading, configuration and the numeric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("label {label} at example {index} is not in {{-1, +1}}")]
    InvalidLabel { index: usize, label: f64 },

    #[error("dual value {alpha} is infeasible for label {label} under {loss} loss")]
    Infeasible {
        loss: &'static str,
        alpha: f64,
        label: f64,
    },

    #[error("invalid sampling: {0}")]
    InvalidSampling(String),

    #[error("sampling support has {size} subsets (limit {limit}); use Monte Carlo mode")]
    SupportTooLarge { size: f64, limit: usize },

    #[error(
        "power iteration did not converge in {iterations} iterations \
         (estimate {estimate}, relative change {residual})"
    )]
    NonConvergence {
        estimate: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("ESO mode {mode} does not apply to {scheme} sampling")]
    ModeMismatch { mode: String, scheme: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
