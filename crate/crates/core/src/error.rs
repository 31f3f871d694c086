use thiserror::Error;

/// Errors raised while reading descriptor or vocabulary files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected \"HBDC\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("descriptor_bits = {0} is not a positive multiple of 8")]
    BadDescriptorBits(u32),
    #[error("truncated payload while reading {field}")]
    Truncated { field: &'static str },
    #[error("inconsistent {field}: {detail}")]
    Inconsistent { field: &'static str, detail: String },
    #[error("{0} trailing bytes after group table")]
    TrailingBytes(usize),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    /// Two descriptors (or a descriptor and a vocabulary) disagree on bit width.
    #[error("descriptor width mismatch: expected {expected} bits, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("need at least {needed} points, got {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(FormatError::Json(e))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
