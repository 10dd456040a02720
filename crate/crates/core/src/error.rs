use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Parameter(String),

    #[error("point {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("value {y} lies outside the image of branch `{label}`")]
    Range { label: String, y: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("inadmissible word: {0}")]
    Combinatorial(String),

    #[error("first return of {x} not resolved within {cap} steps")]
    ReturnNotResolved { x: f64, cap: usize, partial_orbit: Vec<f64> },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("not a coboundary: values at {point} disagree by {discrepancy:e}")]
    NotACoboundary { point: f64, discrepancy: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
