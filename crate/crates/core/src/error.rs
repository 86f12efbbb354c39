use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("Cayley-Klein pair violates |a|^2 + |b|^2 = 1 (got {norm_sq})")]
    NotUnitNorm { norm_sq: f64 },

    /// Non-finite values appeared while integrating.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(
        "degenerate power angle (|sin theta| = {sin_theta:e}); use the direct \
         N-pass propagator, which handles this limit"
    )]
    DegenerateAngle { sin_theta: f64 },

    #[error(
        "coupling matrix is {rows}x{cols} but the ground manifold must be the \
         larger one; transpose it (swap ground and excited roles)"
    )]
    Shape { rows: usize, cols: usize },

    #[error("coupling is identically zero")]
    DegenerateCoupling,

    #[error("error model is not identifiable from this series: {0}")]
    NonIdentifiable(String),
}
