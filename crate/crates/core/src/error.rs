//! Library-wide error type.
//!
//! Faults split into two broad families that callers (notably the CLI) treat
//! differently: data faults (bad files, invalid spans, shape mismatches) and
//! numeric faults (non-finite values showing up where they must not).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("index {index} out of range at position {position}: table has {rows} rows")]
    IndexOutOfRange {
        index: usize,
        position: usize,
        rows: usize,
    },

    #[error("invalid span [{start}, {end}) in a sequence of length {len}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("overlapping spans of the same role: [{a}, {b}) and [{c}, {d})")]
    OverlappingSpans {
        a: usize,
        b: usize,
        c: usize,
        d: usize,
    },

    #[error("invalid tag sequence at position {position}: {reason}")]
    InvalidTags { position: usize, reason: String },

    #[error("corpus error at line {line}: {reason}")]
    Corpus { line: usize, reason: String },

    #[error("embedding file error at line {line}: {reason}")]
    EmbeddingFile { line: usize, reason: String },

    #[error("model bundle error: {0}")]
    Bundle(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for faults caused by NaN/Inf arithmetic rather than bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
