use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside an operation's domain (unknown ids, invalid pmfs, bad grids).
    #[error("domain error: {0}")]
    Domain(String),

    /// Incompatible matrix or vector dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite values or failed numerical routines.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Solver iterate left the admissible cone (Im M no longer positive definite).
    #[error("stability error: {0}")]
    Stability(String),

    /// Problem too large for exact enumeration.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite values")))
    }
}
