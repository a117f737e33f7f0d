use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (intervals, open sets, parameters).
    #[error("validation error: {0}")]
    Validation(String),

    /// The caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A knot index past the configured ladder depth was requested.
    #[error("knot index {index} exceeds ladder depth {max_depth}")]
    DepthExceeded { index: usize, max_depth: usize },

    /// A derivative of `h` above its guaranteed smoothness was requested.
    #[error("derivative of order {order} requested but the function is only C^{bound}")]
    OrderExceeded { order: usize, bound: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("unknown function id `{0}`")]
    UnknownFunction(String),

    #[error("invalid parameters for `{id}`: {reason}")]
    InvalidParams { id: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
