use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The variants line up with the failure classes the command-line front end
/// maps onto exit codes, so callers can match on them instead of on messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for axis {axis} with {dim} levels")]
    Index { axis: usize, index: usize, dim: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("trivial augmentation: {0}")]
    Triviality(String),

    #[error("fit did not converge after {iterations} iterations (max margin gap {max_margin_gap:e})")]
    Convergence {
        iterations: usize,
        max_margin_gap: f64,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
