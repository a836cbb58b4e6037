use thiserror::Error;

/// Errors raised by model construction, evaluation and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a documented precondition or type invariant.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The hypothesis of a structural experiment does not hold for the given inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("numerical failure: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// No truncation bound up to the hard cap keeps the rejection probability below threshold.
    #[error("no truncation bound <= {hard_cap} achieves rejection probability <= {threshold} (J = {achieved:.4})")]
    CapacityInfeasible {
        hard_cap: usize,
        threshold: f64,
        achieved: f64,
    },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status for the command-line runner: 1 for validation
    /// failures, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::CapacityInfeasible { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
