//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate model id `{id}`")]
    DuplicateModelId {
        path: String,
        line: usize,
        id: String,
    },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observation does not match subset: {0}")]
    ObservationMismatch(String),

    #[error("enumerating {states} observations exceeds the exact threshold {limit}")]
    EnumerationTooLarge { states: u128, limit: u64 },

    #[error("instance with {models} models is too large for exhaustive search (limit {limit})")]
    InstanceTooLarge { models: usize, limit: usize },

    #[error("no feasible model: cheapest query cost {min_cost} exceeds budget {budget}")]
    NoFeasibleModel { budget: f64, min_cost: f64 },

    #[error("budget exceeded on query `{query}`: spending {attempted} crosses budget {budget}")]
    BudgetExceeded {
        query: String,
        attempted: f64,
        budget: f64,
    },

    #[error("replay table has no entry for query `{query}`, model `{model}`")]
    MissingReplayCell { query: String, model: String },

    #[error("no embedding row for query `{query}`")]
    MissingEmbedding { query: String },

    #[error("no ground-truth row for query `{query}`")]
    MissingTruth { query: String },

    #[error("embedding rows must share one dimension: row {row} has {got}, expected {expected}")]
    DimensionMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("cluster is empty")]
    EmptyCluster,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &str, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }
}
