use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("insufficient data: {0}")]
    Estimation(String),
    #[error("boundary case: {0}")]
    Boundary(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("replica {replica}: {source}")]
    Replica {
        replica: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
