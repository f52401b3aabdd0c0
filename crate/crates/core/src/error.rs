use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index:?} out of range for grid with counts {counts:?}")]
    Index { index: Vec<usize>, counts: Vec<usize> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The requested time step exceeds the stability limit of the explicit scheme.
    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("reconstruction infeasible: {0}")]
    Infeasible(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
