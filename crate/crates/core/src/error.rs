use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is rank deficient (numerical rank {rank})")]
    RankDeficient { rank: usize },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("generator column {index} is zero")]
    InvalidGenerator { index: usize },
    #[error("cone is not pointed")]
    NotPointed,
    #[error("no improving direction: the cone sees a nonnegative inner product")]
    NoImprovingDirection,
    #[error("vanishing denominator: Gx or Hy is zero")]
    NonPointedDegeneracy,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
