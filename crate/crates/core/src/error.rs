use thiserror::Error;

/// Errors surfaced by scenario loading, the solvers and the agent.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("singular regularized channel matrix (sigma2 = {sigma2})")]
    SingularChannel { sigma2: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large: {what} = {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: f64,
        limit: f64,
    },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("non-finite value during training: {0}")]
    Diverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
