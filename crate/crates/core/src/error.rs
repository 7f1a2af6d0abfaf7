use thiserror::Error;

#[derive(Debug, Error)]
pub enum HfdpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine broke down (failed Cholesky, runaway rejection sampler).
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// A size guard on an exhaustive routine was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    /// Malformed data file. `line` is 1-based and counts the header.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HfdpError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HfdpError::InvalidInput(msg.into()))
}
