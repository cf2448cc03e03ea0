use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HopmapError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HopmapError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("frame {frame_id} has no segments; the map cannot be connected through it")]
    EmptyFrame { frame_id: usize },

    #[error("map is empty")]
    EmptyMap,

    #[error("no map node carries a semantic vector")]
    NoSemanticVectors,

    #[error("query failed: {0}")]
    Query(String),

    #[error("node {target} is unreachable from node {source_node}")]
    Unreachable { source_node: usize, target: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format {found:?}, expected {expected:?}")]
    Format {
        found: String,
        expected: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HopmapError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HopmapError::Parse { .. }
            | HopmapError::Validation(_)
            | HopmapError::EmptyFrame { .. }
            | HopmapError::EmptyMap
            | HopmapError::Config(_)
            | HopmapError::Format { .. }
            | HopmapError::Json(_) => 2,
            HopmapError::NoSemanticVectors | HopmapError::Query(_) => 3,
            HopmapError::Unreachable { .. } | HopmapError::UnknownNode(_) => 4,
            HopmapError::Io(_) => 1,
        }
    }
}
