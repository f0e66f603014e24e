use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variants follow the failure classes the
/// CLI and the C ABI map onto exit/status codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Missing or unparsable header / container metadata.
    #[error("format error: {0}")]
    Format(String),
    /// Header and payload disagree (byte counts, lengths).
    #[error("integrity error: {0}")]
    Integrity(String),
    /// Values that make the computation undefined (NaN, zero norm, constant rows).
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable small integer per variant, shared with the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::Format(_) => 1,
            Error::Integrity(_) => 2,
            Error::Data(_) => 3,
            Error::Config(_) => 4,
            Error::Parameter(_) => 5,
            Error::Shape(_) => 6,
            Error::Mode(_) => 7,
            Error::Lookup(_) => 8,
            Error::Io { .. } => 9,
        }
    }
}
