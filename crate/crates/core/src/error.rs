//! Error type shared by every module of the laboratory.

use thiserror::Error;

/// Everything that can go wrong while building grids, applying operators or
/// running the solvers.
#[derive(Debug, Error)]
pub enum FklError {
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("{what} did not converge after {iterations} iterations (last measure {last:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        last: f64,
    },

    #[error("iteration collapsed to zero: {0}")]
    Collapse(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FklError>;
