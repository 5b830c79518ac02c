use std::path::{Path, PathBuf};

use crate::domain::{EntityKind, PathError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Path(#[from] PathError),

    #[error("issue {id:?} is missing required field `{field}`")]
    InvalidIssue { id: String, field: &'static str },

    #[error("duplicate issue id {0:?}")]
    DuplicateIssueId(String),

    #[error("unknown issue {0:?}")]
    UnknownIssue(String),

    #[error("node {id:?} is a {left:?} in one graph and a {right:?} in another")]
    ConflictingKind { id: String, left: EntityKind, right: EntityKind },

    #[error("unknown graph node {0:?}")]
    UnknownNode(String),

    #[error("duplicate indexable unit {0:?}")]
    DuplicateUnit(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedder fingerprint mismatch: index built with {index:?}, query uses {query:?}")]
    FingerprintMismatch { index: String, query: String },

    #[error("index snapshot {index:?} does not match graph snapshot {graph:?}")]
    IndexMismatch { index: String, graph: String },

    #[error("best match needs at least one candidate file")]
    EmptyCandidateSet,

    #[error("issue pair scoring needs at least one root file")]
    EmptyRootFiles,

    #[error("root issue {0:?} has no scored pairs")]
    NoScoredPairs(String),

    #[error("evaluation corpus is empty")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}
