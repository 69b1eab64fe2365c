use thiserror::Error;

pub type Result<T, E = DmeError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmeError {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("value {value} outside domain of {op}")]
    Domain { op: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("client {client}: {reason}")]
    Encode { client: usize, reason: String },

    #[error("decode failed: {0}")]
    Decode(String),

    #[error("metric unavailable: {0}")]
    Metric(String),

    #[error("codebook of {entries} entries exceeds cap of {cap}")]
    Memory { entries: usize, cap: usize },

    #[error("{0}")]
    Io(String),

    #[error("ingest error at row {row}: {reason}")]
    Ingest { row: usize, reason: String },
}

impl DmeError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        DmeError::Param(msg.into())
    }
}

impl From<std::io::Error> for DmeError {
    fn from(e: std::io::Error) -> Self {
        DmeError::Io(e.to_string())
    }
}
