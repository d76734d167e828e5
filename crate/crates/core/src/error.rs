use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("alphabet of size {size} exceeds the exhaustive search cap of {cap}; use the memetic search instead")]
    ExhaustiveCap { size: usize, cap: usize },

    #[error("sub-sequence has simultaneous events at time {time}")]
    Simultaneous { time: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
