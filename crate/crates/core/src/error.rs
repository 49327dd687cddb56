//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{op} is not supported in dimension {dim}")]
    UnsupportedDimension { op: &'static str, dim: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("not a Levy measure: {0} part diverges")]
    NotLevyMeasure(String),

    #[error("integrability exponent p = {p} is outside the admissible range (p_max = {p_max})")]
    ExponentOutOfRange { p: f64, p_max: f64 },

    #[error("spectral normalization mismatch: measured ratio {measured} matches no known constant")]
    NormalizationMismatch { measured: f64 },

    #[error("jump table build failure: {0}")]
    TableBuildFailure(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
