use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("horizon {horizon} exceeds the {available} steps available")]
    Horizon { horizon: usize, available: usize },
    #[error("incomplete matching: {0} stubs unmatched")]
    Incomplete(usize),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParams(msg.into()))
}
