use thiserror::Error;

pub type Result<T, E = GofError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GofError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: data has {data} bins, model has {model}")]
    DimensionMismatch { data: usize, model: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("unsupported statistic for this path: {0}")]
    UnsupportedStatistic(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl GofError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GofError::InvalidArgument(msg.into())
    }
}
