use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: expected {expected} column(s), found {found}")]
    ColumnMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid BIO sequence at position {position}: {reason}")]
    InvalidBio { position: usize, reason: String },
    #[error("entity spans overlap or fall outside the sentence: {0}")]
    BadSpans(String),
    #[error("invalid tag scheme: {0}")]
    Scheme(String),
    #[error("empty word in segmented input")]
    EmptyWord,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("sentence has no gold labels")]
    MissingGold,
    #[error("forward cache is stale: parameters changed since the forward pass")]
    StaleCache,
    #[error("embedding file line {line}: expected {expected} components, found {found}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding file line {line}: non-numeric component `{value}`")]
    EmbeddingValue { line: usize, value: String },
    #[error("model file is truncated")]
    Truncated,
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file shape inconsistency: {0}")]
    ShapeMismatch(String),
    #[error("tag set mismatch: model has [{model}], requested [{requested}]")]
    TagsetMismatch { model: String, requested: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
