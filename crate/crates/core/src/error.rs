use thiserror::Error;

/// Errors raised by field calculus, deformation updates and the flow driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("metric is not positive definite at node {node} (det = {det:e}, trace = {trace:e})")]
    NotPositiveDefinite { node: usize, det: f64, trace: f64 },

    #[error("map is not a diffeomorphism: min det(Dphi) = {min_det:e} <= floor {floor:e}")]
    NonDiffeomorphic { min_det: f64, floor: f64 },

    #[error("inverse-consistency defect {defect:.4} cells exceeds bound {bound:.4}")]
    InverseDefectExceeded { defect: f64, bound: f64 },

    #[error("line search failed: no energy decrease down to dt = {dt:e}")]
    LineSearchFailed { dt: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
