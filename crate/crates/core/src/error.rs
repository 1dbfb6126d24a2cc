use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers and post-processing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported polynomial degree {degree} (supported: {min}..={max})")]
    Degree { degree: usize, min: usize, max: usize },
    #[error("unsupported quadrature exactness {0} (max 20)")]
    Quadrature(usize),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
