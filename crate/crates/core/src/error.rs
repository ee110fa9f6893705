use thiserror::Error;

use crate::engine::InterventionLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// The transformation could not reach zero violation.
    #[error("transform {triplet} failed: best violation reached {best_violation}")]
    TransformFailure { triplet: String, best_violation: f64 },

    #[error("oracle timed out after {seconds} s")]
    OracleTimeout { seconds: f64 },

    #[error("oracle protocol error: {0}")]
    OracleProtocol(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("no explanation found: {reason}")]
    NoExplanation { reason: String, log: Box<InterventionLog> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_oracle_error(&self) -> bool {
        matches!(
            self,
            Error::OracleTimeout { .. } | Error::OracleProtocol(_) | Error::OracleFailure(_)
        )
    }
}
