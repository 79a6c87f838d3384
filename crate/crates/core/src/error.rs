use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("rank deficiency: requested {requested} components but covariance rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A fitness or classifier evaluation produced an unusable value.
    #[error("evaluation error: {message}")]
    Evaluation { message: String, genome: Option<Vec<f64>> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, message: msg.into() }
    }

    pub(crate) fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation {
            message: msg.into(),
            genome: None,
        }
    }
}
