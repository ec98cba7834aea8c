use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parquet error on {path}: {source}")]
    Parquet {
        path: PathBuf,
        #[source]
        source: parquet::errors::ParquetError,
    },

    #[error("missing dataset: {0}")]
    MissingDataset(PathBuf),

    #[error("schema mismatch in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    #[error("invalid corpus: {0}")]
    Invalid(String),

    #[error("document {doc_id}: annotation [{start}, {stop}) literal {literal:?} does not match text {found:?}")]
    LiteralMismatch {
        doc_id: String,
        start: usize,
        stop: usize,
        literal: String,
        found: String,
    },

    #[error(
        "document {doc_id}: annotation [{start}, {stop}) out of range for text of length {len}"
    )]
    OutOfRange {
        doc_id: String,
        start: usize,
        stop: usize,
        len: usize,
    },

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("annotator {0:?} not present in corpus")]
    MissingAnnotator(String),

    #[error("annotator {0:?} already present (use overwrite to replace it)")]
    DuplicateAnnotator(String),

    #[error("xml error: {0}")]
    Xml(String),

    #[error("unknown tokenizer {0:?} (expected wordpunct or whitespace)")]
    UnknownTokenizer(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("annotation {doc_id}[{start}, {stop}) ({raw_label}) has no canonical category")]
    MissingCategory {
        doc_id: String,
        start: usize,
        stop: usize,
        raw_label: String,
    },

    #[error("token lists differ between gold and prediction for document {0:?}")]
    TokenMismatch(String),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid pattern {rule_id}: {source}")]
    Pattern {
        rule_id: String,
        #[source]
        source: regex::Error,
    },

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            detail: detail.to_string(),
        }
    }
}
