use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A search or enumeration would exceed its element budget.
    /// `completed` is the last fully finished stage (BFS radius, neighborhood round, ...).
    #[error("budget of {limit} exceeded while {during}; last completed stage: {completed:?}")]
    BudgetExceeded { limit: usize, during: String, completed: Option<u32> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An exactly checked lemma or envelope failed. This means the harness is wrong.
    #[error("certification violated: {0}")]
    Violation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
