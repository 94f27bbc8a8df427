use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A random graph could not be made connected within the retry budget.
    #[error("graph construction failed: {0}")]
    Construction(String),

    /// An iterative or spectral routine failed numerically.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A read-index schedule violates its staleness window.
    #[error("delay schedule violation: {0}")]
    Schedule(String),

    /// A malformed binary or text container.
    #[error("format error: {0}")]
    Format(String),

    /// Input that is well-formed but carries no usable content.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Run configuration failed validation; `field` is the dotted path.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A simulator invariant did not hold.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
