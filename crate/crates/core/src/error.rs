use thiserror::Error;

/// Failures while decoding a table file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a table file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported table file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("table file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("table file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed table file: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration or parameter ranges.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine failed to converge or to bracket a root.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Numerical(_) => 3,
            Error::Format(_) | Error::Io(_) => 4,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e.to_string()))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(std::io::Error::other(e.to_string()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
