use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. `exit_code` maps each variant onto the CLI
/// contract: 0 success, 1 usage, 2 validation, 3 convergence failure.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity was outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A config file failed to parse or validate, with a line number.
    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },

    /// Inputs were structurally valid but inconsistent or out of range.
    #[error("validation error: {0}")]
    Validation(String),

    /// A lookup position fell outside the computed grid.
    #[error("range error: {0}")]
    Range(String),

    /// The command line itself was malformed.
    #[error("usage error: {0}")]
    Usage(String),

    /// A requested source sampling violates the phase sampling rule.
    #[error("source step {step:.6e} m on the {axis} axis violates the phase sampling rule; need step <= {required:.6e} m")]
    SamplingRule { axis: char, step: f64, required: f64 },

    /// The quadrature halving study did not reach the deviation limit.
    #[error("quadrature did not converge: deviation {deviation:.3e} after {refinements} refinements (limit {limit:.1e})")]
    Convergence { deviation: f64, refinements: usize, limit: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Convergence { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
