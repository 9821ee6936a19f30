use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

/// Harness errors, split by how the CLI should exit: validation problems
/// exit 2, I/O problems exit 3.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Validation(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl BenchError {
    pub fn validation(msg: impl Into<String>) -> Self {
        BenchError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Validation(_) => 2,
            BenchError::Io(_) => 3,
        }
    }
}

impl From<summix_core::Error> for BenchError {
    fn from(e: summix_core::Error) -> Self {
        match e {
            summix_core::Error::Io(msg) => BenchError::Io(msg),
            other => BenchError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}
