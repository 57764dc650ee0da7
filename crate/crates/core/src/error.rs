use std::path::PathBuf;

use crate::corpus::ItemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its contract.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm embedding")]
    ZeroVector,

    #[error("duplicate item id {id}{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    DuplicateId { id: ItemId, line: Option<usize> },

    #[error("unknown item id {0}")]
    UnknownItem(ItemId),

    #[error("invalid threshold {name} = {value}: {reason}")]
    InvalidThreshold {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("score for item {id} out of range [0, 1]: {score}")]
    ScoreOutOfRange { id: ItemId, score: f64 },

    #[error("record for item {0} cannot act as a propagation source")]
    InvalidSource(ItemId),

    #[error("invalid label record for item {id}: {reason}")]
    InvalidRecord { id: ItemId, reason: String },

    #[error("item {0} is already labeled")]
    AlreadyLabeled(ItemId),

    #[error("budget {budget} exceeds corpus size {corpus_size}")]
    BudgetExceedsCorpus { budget: usize, corpus_size: usize },

    #[error("ground truth missing for item {0}")]
    MissingGroundTruth(ItemId),

    #[error("oracle failure on item {id}: {message}")]
    Oracle { id: ItemId, message: String },

    /// A funnel stage failed; the round that ran it was rolled back.
    #[error("round {round} aborted in stage `{stage}`: {source}")]
    Stage {
        round: u32,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_stage(self, round: u32, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                round,
                stage,
                source: Box::new(other),
            },
        }
    }
}
