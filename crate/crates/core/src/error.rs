use std::fmt;

/// Errors raised by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configured size limit would be exceeded.
    #[error("budget exceeded in {stage}: {what} = {value} exceeds limit {limit}")]
    Budget {
        stage: String,
        what: String,
        value: String,
        limit: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn budget(
        stage: &str,
        what: &str,
        value: impl fmt::Display,
        limit: impl fmt::Display,
    ) -> Self {
        Error::Budget {
            stage: stage.to_string(),
            what: what.to_string(),
            value: value.to_string(),
            limit: limit.to_string(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Re-labels a budget error with the pipeline stage it surfaced in.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Budget {
                what, value, limit, ..
            } => Error::Budget {
                stage: stage.to_string(),
                what,
                value,
                limit,
            },
            other => other,
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}
