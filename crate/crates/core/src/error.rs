use dynfleet_lp::LpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid noise parameters: {0}")]
    Noise(String),
    #[error("{0} stations is too many for exact route enumeration (max 12)")]
    TooManyStations(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver: {0}")]
    Solver(#[from] LpError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
