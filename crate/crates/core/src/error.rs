use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tag set: {0}")]
    TagSet(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("hierarchy line {line}: {message}")]
    HierarchySyntax { line: usize, message: String },

    #[error("unknown tag `{0}` in hierarchy")]
    UnknownTag(String),

    #[error("tag hierarchy contains a cycle through `{0}`")]
    Cycle(String),

    #[error("placeholder `{0}` collides with an existing tag")]
    PlaceholderCollision(String),

    #[error("projection of tag set `{tag_set}` is not a partition: {message}")]
    PartitionViolation { tag_set: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large for enumeration ({labels}^{len} paths)")]
    TooLarge { labels: usize, len: usize },

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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
