use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported quadrature order {0} (supported: 1..=6)")]
    UnsupportedOrder(usize),

    #[error("unsupported polynomial degree {0} (supported: 1, 2)")]
    UnsupportedDegree(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid multimesh configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dof {dof} is not on a flagged boundary")]
    NotOnBoundary { dof: usize },

    #[error("point ({x}, {y}) is outside the computational domain")]
    PointNotFound { x: f64, y: f64 },

    #[error("matrix is not positive definite: negative curvature {curvature:e} along search direction {iteration}")]
    NegativeCurvature { iteration: usize, curvature: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigenvalue estimation broke down: {0}")]
    EigenBreakdown(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
