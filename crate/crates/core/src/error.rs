use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("channel not excited: {0}")]
    ChannelNotExcited(&'static str),

    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    #[error("no convergence after {iterations} iterations (best residual {best_residual:.6e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("dead-zone range not bracketed: {0}")]
    RangeNotBracketed(String),

    #[error("out-of-order sample: stamp {stamp} precedes {last}")]
    OutOfOrder { stamp: f64, last: f64 },

    #[error("sequence number {seq} does not follow {last}")]
    SequenceOrder { seq: u64, last: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical abort at t = {time:.4} s: {reason}\n{dump}")]
    Numerical { time: f64, reason: String, dump: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
