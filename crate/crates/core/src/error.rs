use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("resolution too coarse: need at least 2 cells per axis, got {0}")]
    TooCoarse(usize),
    #[error("size mismatch: expected {expected} values, got {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("invalid exponent: p = {value} at node {node} (need p > 1)")]
    InvalidExponent { node: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside the positive cone at node {node} (value {value})")]
    OutsideCone { node: usize, value: f64 },
    #[error("missing model term: {0}")]
    MissingTerm(&'static str),
    #[error("inadmissible pair: ratio bound {ratio:e} exceeds cap {cap:e}")]
    Inadmissible { ratio: f64, cap: f64 },
    #[error("model defect: {0}")]
    ModelDefect(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("expression error: {0}")]
    Expr(#[from] crate::expr::ExprError),
    #[error("hypothesis validation failed: {0}")]
    Validation(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("linear solve failed: matrix not positive definite at row {0}")]
    NotPositiveDefinite(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
