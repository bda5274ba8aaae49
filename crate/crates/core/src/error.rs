use std::fmt;

/// Crate-wide error type. Simulation and geometry share one taxonomy so the
/// CLI can map every failure to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("space-time point ({x}, {t}) outside window/horizon")]
    OutOfWindow { x: i64, t: f64 },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
