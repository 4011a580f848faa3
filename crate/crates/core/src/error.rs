use thiserror::Error;

/// Errors raised by the scenario generator, the estimators and the metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar routine received an argument outside its domain (nonpositive
    /// variance, NaN/inf input, ...).
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    /// Arrays whose shapes must agree do not.
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },
    /// A configuration value violates its invariant.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    /// The engine was asked to sweep an empty schedule.
    #[error("empty schedule passed to {0}")]
    EmptySchedule(&'static str),
    /// Scenario (de)serialization failure.
    #[error("scenario file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}

pub(crate) fn dimension(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
