use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The gradient cache holds no entries yet.
    #[error("no gradient available: the cache is empty")]
    NoGradient,

    /// Gram-Schmidt hit a column that is (numerically) dependent on the previous ones.
    #[error("rank-deficient input: column {column} is linearly dependent")]
    RankDeficient { column: usize },

    /// An optimum oracle did not reach its tolerance within the iteration budget.
    #[error("oracle did not converge: {0}")]
    Oracle(String),

    /// An experiment configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
