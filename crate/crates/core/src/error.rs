use std::path::PathBuf;

use thiserror::Error;

use crate::data::Group;
use crate::metrics::ObjectiveKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{column}` {reason}")]
    Schema { column: String, reason: String },

    #[error("row {row}: cannot parse column `{column}` value {value:?}: {reason}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset shape: {0}")]
    InvalidDataset(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("infeasible skew: {reason} (achievable ratio bound: {achievable})")]
    InfeasibleSkew { reason: String, achievable: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid validation split: {0}")]
    InvalidValidationSplit(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("group {0} has no rows")]
    MissingGroup(Group),

    #[error("group {0} has no positive-label rows")]
    MissingPositives(Group),

    #[error("invalid objectives: {0}")]
    InvalidObjectives(String),

    #[error("objective {objective} failed: {source}")]
    Objective {
        objective: ObjectiveKind,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate aggregation weights: {0}")]
    DegenerateWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric overflow for client {client}: {detail}")]
    NumericOverflow { client: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown preset `{name}`; registered presets: {}", available.join(", "))]
    UnknownPreset {
        name: String,
        available: Vec<String>,
    },

    #[error("round {round} failed: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for problems with the run's inputs that are detected before any
    /// training happens.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownPreset { .. }
                | Error::InvalidObjectives(_)
                | Error::InvalidParameter(_)
                | Error::Schema { .. }
                | Error::Json(_)
        )
    }
}
