use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by simulator components.
#[derive(Debug, Error)]
pub enum Error {
    #[error("object type index {index} out of range for {m} types")]
    TypeIndexOutOfRange { index: usize, m: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("market state error: {0}")]
    State(String),

    #[error("total conflict between combined mass functions")]
    TotalConflict,

    #[error("i/o error at {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
