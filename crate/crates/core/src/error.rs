use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,

    #[error("vector contains a non-finite component")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}{}", line_suffix(*.line))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no n-grams to hash")]
    EmptyInput,

    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),

    #[error("query encoder {query} does not match index encoder {index}")]
    EncoderMismatch { query: String, index: String },

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("document ordinal {ordinal} out of range (corpus size {len})")]
    OrdinalOutOfRange { ordinal: usize, len: usize },

    #[error("duplicate qrels entry for query `{query}`, document `{doc}`")]
    DuplicatePair { query: String, doc: String },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("no relevant documents for query")]
    NoRelevantDocs,

    #[error("sweep configuration `{label}` failed: {source}")]
    Sweep {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into().display().to_string(),
            source,
        }
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            expected,
            found,
            line: None,
        }
    }
}
