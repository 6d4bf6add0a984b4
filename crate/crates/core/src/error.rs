use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("metric overflow: shrink window or renormalize (|exponent| = {exponent:.3e} exceeds cap {cap})")]
    MetricOverflow { exponent: f64, cap: f64 },

    #[error(
        "grid too coarse for symmetrization at index {index} (upper = {upper:e}, lower = {lower:e}); \
         refine until dx < {dx_bound:e}"
    )]
    GridTooCoarse {
        index: usize,
        upper: f64,
        lower: f64,
        dx_bound: f64,
    },

    #[error("operator is not symmetrizable by the given metric at index {index} (relative mismatch {mismatch:e})")]
    NotSymmetrizable { index: usize, mismatch: f64 },

    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}
