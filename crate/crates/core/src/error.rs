use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("document {0} has no tokens")]
    EmptyDocument(String),

    #[error("network has zero total weight")]
    ZeroWeight,

    #[error("graph has {components} connected components but only k = {k} clusters were requested; use k >= {components}")]
    TooManyComponents { components: usize, k: usize },

    #[error("{skipped} of {total} bootstrap resamples failed (more than 20%)")]
    BootstrapFailures { skipped: usize, total: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative numerical method, as opposed to bad data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::BootstrapFailures { .. }
        )
    }
}
