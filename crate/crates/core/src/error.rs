use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("singular system at s = {s}, p = {p:?}")]
    Singular { s: Complex64, p: Vec<f64> },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("bisection bracket failure: no level below the initial upper bound {gamma_u} was accepted; raise gamma_u")]
    Bracket { gamma_u: f64, trace_csv: String },

    #[error("sampling grid exceeded the vertex budget of {budget}")]
    Budget { budget: usize },

    #[error("estimator failed: {skipped} of {total} evaluations could not be computed")]
    Estimator { skipped: usize, total: usize },

    #[error("{path}: {msg}")]
    Ingest { path: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
