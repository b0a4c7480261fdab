use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("capacity exceeded: {what} is {value}, limit is {limit}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("generators {i} and {j} do not commute")]
    NonCommuting { i: usize, j: usize },

    #[error("generator set is dependent: rank {rank} < {expected}")]
    Rank { rank: usize, expected: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no error class for syndrome {0}")]
    NoErrorClass(String),

    #[error("Gram condition violated by the pair ({e}, {f}) with defect {defect:.3e}")]
    Consistency { e: String, f: String, defect: f64 },

    #[error("Weingarten pole: d = {0} must be at least 4")]
    Pole(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
