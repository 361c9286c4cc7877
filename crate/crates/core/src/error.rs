use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("bond index {bond} out of range (bond count {count})")]
    BondOutOfRange { bond: usize, count: usize },
    #[error("histogram mismatch: {0}")]
    Mismatch(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("no percolation: {0}")]
    NoPercolation(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what} at line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
