use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the denoising toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input point cloud is empty")]
    EmptyInput,

    #[error("leaf has {0} candidate point(s); density estimation needs at least 2")]
    DegenerateLeaf(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("non-finite coordinate in point record(s) {records:?}")]
    NonFinite { records: Vec<usize> },

    #[error("label channel has {labels} entries but the cloud has {points} points")]
    LabelMismatch { labels: usize, points: usize },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
