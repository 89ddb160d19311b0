use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid MCS table: {0}")]
    InvalidTable(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature failed to converge on segment {segment} [{lower}, {upper}] (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        segment: usize,
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
    },

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("auction did not terminate within {cap} iterations ({detail})")]
    AuctionStalled { cap: u64, detail: String },

    #[error("cost overflow: scale {scale} times cost {cost} exceeds integer range")]
    CostOverflow { scale: f64, cost: f64 },

    #[error("problem too large for brute force: M={m}, N={n} (limit M<=5, N<=8)")]
    OracleTooLarge { m: usize, n: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
