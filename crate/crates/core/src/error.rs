use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid window: side lengths must be positive and finite, got ({0}, {1})")]
    InvalidWindow(f64, f64),

    #[error("duplicate point at ({x}, {y}); patterns must be simple")]
    DuplicatePoint { x: f64, y: f64 },

    #[error("window calibration failed: {0}")]
    Calibration(String),

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
