use thiserror::Error;

/// Every fallible operation in the crate returns this.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid scenario generator: {0}")]
    InvalidGenerator(String),
    #[error("invalid pilot configuration: {0}")]
    InvalidPilot(String),
    #[error("dense size {requested} exceeds cap {cap}")]
    SizeCap { requested: usize, cap: usize },
    #[error("statistical CSI has empty support")]
    EmptySupport,
    #[error("linear system is singular or not positive definite")]
    Singular,
    #[error("non-finite value in iteration {iter}")]
    NonFinite { iter: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
