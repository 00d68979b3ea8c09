use thiserror::Error;

/// Errors raised by model construction, risk evaluation and the contract solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid scenario file: {0}")]
    Schema(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible: {reason} (minimal achievable perceived cost {min_cost})")]
    Infeasible { reason: String, min_cost: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
