use thiserror::Error;

use crate::arith::Factorization;
use crate::beta::BetaJReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite term at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    /// Factorization ran out of effort on a composite cofactor. The partial
    /// factorization holds every prime found so far.
    #[error("unresolved composite cofactor {cofactor} after exhausting the factorization budget")]
    UnresolvedCofactor {
        partial: Factorization,
        cofactor: u64,
    },

    #[error("resource limit exceeded: {message}")]
    Resource { message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("run interrupted after {completed_chunks} checkpoint chunks")]
    Interrupted { completed_chunks: usize },

    /// A multi-j beta run failed part way; reports for the completed j are kept.
    #[error("beta run aborted at j = {j}: {source}")]
    BetaAborted {
        j: u32,
        #[source]
        source: Box<Error>,
        partial: Vec<BetaJReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::Resource {
            message: msg.into(),
        }
    }

    /// True for errors caused by bad input rather than by limits hit at run time.
    pub fn is_parameter_error(&self) -> bool {
        match self {
            Error::Parameter(_) | Error::NonFinite { .. } => true,
            Error::BetaAborted { source, .. } => source.is_parameter_error(),
            _ => false,
        }
    }
}
