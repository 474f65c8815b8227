//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible grid or detector shapes.
    #[error("shape mismatch in {op}: {expected} vs {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    /// A binary file did not match the expected layout; names the offending field.
    #[error("format error in {path}: field `{field}`: {reason}")]
    Format {
        path: String,
        field: &'static str,
        reason: String,
    },

    /// An iterative solver failed to make progress.
    #[error("solver error: {reason}")]
    Solver {
        reason: String,
        /// Residual history up to the failure, for post-mortems.
        trace: Vec<f64>,
    },

    /// An agent evaluation failed inside the consensus loop.
    #[error("agent {index} failed: {source}")]
    Agent {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Invalid configuration value, with enough context to locate it.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Shape {
            op,
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn format(path: impl Into<String>, field: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            field,
            reason: reason.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
