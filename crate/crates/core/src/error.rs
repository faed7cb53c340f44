use thiserror::Error;

/// Errors raised by the geometry, quadrature and flow routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error("invalid space parameters: {0}")]
    InvalidSpace(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("catalog entry `{0}` is informational only and cannot drive a flow")]
    InformationalEntry(String),

    #[error("pole of the cotangent kernel at theta = {0}")]
    Pole(f64),

    #[error("radius {r} is outside (0, r_F) with r_F = {focal}")]
    RadiusOutOfRange { r: f64, focal: f64 },

    #[error("invalid point data: {0}")]
    InvalidPoint(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("quadrature failed to converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("value {y} is outside the range [{lo}, {hi}] of the function being inverted")]
    InversionRange { y: f64, lo: f64, hi: f64 },

    #[error("numerical failure at t = {t}: {reason}")]
    Numerical { t: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("audit needs {needed} stored states, got {got}")]
    InsufficientStates { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, TubeError>;
