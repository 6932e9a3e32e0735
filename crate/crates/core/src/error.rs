use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Positioned failure while decoding a binary container.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{format} parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub format: &'static str,
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("bad magic: expected {expected:#010x}, found {actual:#010x}")]
    BadMagic { expected: u32, actual: u32 },
    #[error("bad magic: expected {expected:?}, found {actual:?}")]
    BadTag { expected: String, actual: String },
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite weight after SGD step in layer {layer}")]
    NonFinite { layer: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("pruning step {step} beyond schedule of length {len}")]
    ScheduleExhausted { step: usize, len: usize },
    #[error("empty layer {0}")]
    EmptyLayer(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("content hash mismatch for {path}: manifest says {expected}, blob hashes to {actual}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("manifest version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid experiment plan: {0}")]
    Plan(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent input data, as
    /// opposed to bad arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::HashMismatch { .. }
                | Error::VersionMismatch { .. }
                | Error::Io { .. }
                | Error::Json(_)
                | Error::EmptyDataset
                | Error::Label { .. }
        )
    }
}
