use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector is not unit norm (norm = {0})")]
    NotUnit(f64),

    #[error("degenerate power iterate: contraction norm {0:e} below threshold")]
    DegenerateIterate(f64),

    #[error("all {0} initializations were degenerate")]
    AllInitializationsDegenerate(usize),

    #[error("dense tensor of dimension {d} exceeds the limit of {limit}; use ImplicitMoment")]
    TooLarge { d: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        })
    }
}
