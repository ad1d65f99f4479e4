use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("file holds {found} values, header implies {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("bad header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("column {0} is zero or not finite")]
    ZeroColumn(usize),
    #[error("numerically rank deficient at column {0}")]
    RankDeficient(usize),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("matrix is singular")]
    Singular,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl Error {
    /// True for the failures caused by a rank-deficient input.
    pub fn is_rank_failure(&self) -> bool {
        matches!(
            self,
            Error::ZeroColumn(_)
                | Error::RankDeficient(_)
                | Error::NotPositiveDefinite(_)
                | Error::Singular
        )
    }
}
