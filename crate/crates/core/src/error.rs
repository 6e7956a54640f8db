use thiserror::Error;

/// Errors raised by the samplers, models and oracles in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("NaN encountered in {0}")]
    NotANumber(&'static str),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("state space of {states} ensemble states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
