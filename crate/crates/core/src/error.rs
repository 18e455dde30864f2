use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("loss mask selects no positions")]
    EmptyMask,

    #[error("backward called on an empty tape")]
    EmptyTape,

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("sequence of length {len} exceeds max_length {max_length}")]
    SequenceTooLong { len: usize, max_length: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("parameter length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{0} requires at least one batch")]
    NoBatches(&'static str),

    #[error("{path}:{line}: {reason}")]
    DatasetLine { path: PathBuf, line: usize, reason: String },

    #[error("duplicate example id `{id}` ({context})")]
    DuplicateId { id: String, context: &'static str },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("input of {input_len} tokens leaves no room for output within max_length {max_length}")]
    InputTooLong { input_len: usize, max_length: usize },

    #[error("invalid corpus spec: {0}")]
    InvalidCorpusSpec(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("missing report part `{0}`")]
    MissingPart(&'static str),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// Short stable tag used by the command-line front end for
    /// machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::EmptyMask => "empty_mask",
            Error::EmptyTape => "empty_tape",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::TokenOutOfRange { .. } => "token_out_of_range",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::SequenceTooLong { .. } => "sequence_too_long",
            Error::EmptySequence => "empty_sequence",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NoBatches(_) => "no_batches",
            Error::DatasetLine { .. } => "dataset_parse",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::EmptyDataset => "empty_dataset",
            Error::UnknownToken(_) => "unknown_token",
            Error::InputTooLong { .. } => "input_too_long",
            Error::InvalidCorpusSpec(_) => "invalid_corpus_spec",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::MissingPart(_) => "missing_part",
            Error::ModelMismatch(_) => "model_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
