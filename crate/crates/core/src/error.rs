use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for a set of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("relation contains a cycle: {cycle:?}")]
    Cycle { cycle: Vec<usize> },

    #[error("elements {x} and {y} are not related as {y} < {x}")]
    NotRelated { x: usize, y: usize },

    #[error("element {0} lies outside the 2-layer past infinity but has no rank-2 predecessor")]
    NoRankTwoPredecessor(usize),

    #[error("zero diagonal entry in row {0} of a triangular operator")]
    SingularOperator(usize),

    #[error("precondition violated at indices {indices:?}: {what}")]
    Precondition { what: String, indices: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{side} Cauchy evolution is not invertible")]
    NotInvertible { side: &'static str },

    #[error("missing embedding coordinates")]
    MissingCoordinates,

    #[error("missing length scale")]
    MissingLengthScale,

    #[error("degree {degree} exceeds the configured cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("hbar power {power} below the allowed minimum {min}")]
    HbarUnderflow { power: i32, min: i32 },

    #[error("series has a negative hbar coefficient of size {size:e} at (h^{hbar}, l^{lambda})")]
    Unphysical { hbar: i32, lambda: u32, size: f64 },

    #[error("leading coefficient of the series is not the unit")]
    NonUnitLeading,

    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e}); try lambda-order mode")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("odd number of fields ({0}) in a quasifree correlator")]
    OddCorrelator(usize),

    #[error("interaction is supported on the past infinity at {0:?}")]
    SupportOnBoundary(Vec<usize>),

    #[error("interaction has non-real coefficients")]
    ComplexInteraction,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
