use thiserror::Error;

/// Errors raised by the numerical routines and the configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel evaluated at its singular point x = 0")]
    Singularity,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("resolution {0} is too small (at least 3 nodes per axis)")]
    Resolution(usize),

    #[error("memory budget exceeded: {nodes} interior nodes exceed the cap of {cap}")]
    MemoryBudget { nodes: usize, cap: usize },

    #[error("grid mismatch: {0}")]
    Mismatch(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("hypothesis `{name}` violated: {detail}")]
    Hypothesis { name: String, detail: String },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used for the CLI's JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singularity => "singularity",
            Error::Quadrature(_) => "quadrature",
            Error::Resolution(_) => "resolution",
            Error::MemoryBudget { .. } => "memory_budget",
            Error::Mismatch(_) => "mismatch",
            Error::Invariant(_) => "invariant",
            Error::NonConvergence(_) => "non_convergence",
            Error::Hypothesis { .. } => "hypothesis",
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
