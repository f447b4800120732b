use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("modulus domain error: {0}")]
    Domain(String),

    #[error("modulus not integrable: {0}")]
    Integrability(String),

    #[error("degenerate curve: arc-chord {arc_chord:.3e} below threshold {threshold:.3e}")]
    DegenerateCurve { arc_chord: f64, threshold: f64 },

    #[error("localization frame has |U| = 0 at the base point")]
    DegenerateFrame,

    #[error("series divergence: sup|D| = {sup_d:.3} >= 1; shrink delta")]
    SeriesDivergence { sup_d: f64 },

    #[error("recursion depth {depth} exceeds limit {limit}")]
    RecursionDepth { depth: u32, limit: u32 },

    #[error("identity violation in {what}: residual {residual:.3e} > tol {tol:.3e}")]
    IdentityViolation {
        what: String,
        residual: f64,
        tol: f64,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
