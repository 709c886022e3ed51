use std::path::PathBuf;

use thiserror::Error;
use xnlu_autodiff::TensorError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line} (id {id}): expected {expected} tab-separated columns, found {found}")]
    ColumnCount {
        line: usize,
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("line {line} (id {id}): {tokens} tokens but {tags} tags")]
    LengthMismatch {
        line: usize,
        id: String,
        tokens: usize,
        tags: usize,
    },

    #[error("line {line} (id {id}): malformed BIO tag `{tag}`")]
    MalformedTag { line: usize, id: String, tag: String },

    #[error("line {line} (id {id}): {msg}")]
    BadRow { line: usize, id: String, msg: String },

    #[error("translation for id `{0}` has no matching source utterance")]
    UnmatchedId(String),

    #[error("source utterance `{0}` has no translation")]
    MissingTranslation(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("length mismatch for `{id}`: {left} vs {right}")]
    SequenceLength { id: String, left: usize, right: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
