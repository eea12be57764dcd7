use thiserror::Error;

/// Errors produced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("resample error: {0}")]
    Resample(String),

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("unsupported model family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("{0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
