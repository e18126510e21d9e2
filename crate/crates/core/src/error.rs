use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MdlError> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// The variants group into four classes (see [`ErrorClass`]) which the
/// command-line front end maps onto exit codes.
#[derive(Debug, Error)]
pub enum MdlError {
    #[error("dimension mismatch at layer {layer}: expected {expected}, found {found}")]
    Dimension {
        layer: usize,
        expected: String,
        found: String,
    },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid usage: {0}")]
    Usage(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Numerical => "numerical",
        }
    }
}

impl MdlError {
    pub fn class(&self) -> ErrorClass {
        match self {
            MdlError::Usage(_) | MdlError::Domain(_) => ErrorClass::Usage,
            MdlError::Numerical { .. } => ErrorClass::Numerical,
            MdlError::Dimension { .. }
            | MdlError::Index(_)
            | MdlError::Format { .. }
            | MdlError::Consistency(_)
            | MdlError::Range(_)
            | MdlError::Size(_)
            | MdlError::Io { .. } => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MdlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        MdlError::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn dimension(layer: usize, expected: impl ToString, found: impl ToString) -> Self {
        MdlError::Dimension {
            layer,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
