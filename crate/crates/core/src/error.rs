use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component {index} has modulus {modulus:e}, below the normalization floor")]
    ZeroComponent { index: usize, modulus: f64 },

    #[error("infeasible coupling spec: {0}")]
    InfeasibleSpec(String),

    #[error("non-finite objective or gradient in {stage} stage at iteration {iteration}")]
    NonFiniteObjective { stage: &'static str, iteration: usize },

    #[error("non-finite training loss at epoch {epoch} (batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
