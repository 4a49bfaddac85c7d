use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is invalid or inconsistent with another one.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke an operation's contract (length or shape mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value at index {index}: {what}")]
    NonFinite { index: usize, what: String },

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("ratio {ratio} has no integer split of {epochs} epochs; nearest feasible ratios: {nearest:?}")]
    InfeasibleRatio {
        ratio: f64,
        epochs: u32,
        nearest: Vec<f64>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: u32,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_batch(self, epoch: u32, batch: usize) -> Self {
        Error::Training {
            epoch,
            batch,
            source: Box::new(self),
        }
    }
}
