use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("point is not in the open cone")]
    NotInCone,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("uncovered frequency support: energy fraction {fraction:e}")]
    Uncovered { fraction: f64 },
    #[error("lattice verification failed: {0}")]
    Lattice(String),
    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    Budget { what: String, needed: usize, limit: usize },
    #[error("iteration diverged after {iterations} steps (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("iteration did not reach tolerance in {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
