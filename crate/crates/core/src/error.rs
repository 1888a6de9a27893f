use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("gap in periods at line {line}: expected {expected}, found {found}")]
    Gap {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("numerical failure{}: {message}", at.map(|t| format!(" at t={t}")).unwrap_or_default())]
    Numerical { at: Option<usize>, message: String },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Spec(_) => ErrorKind::Argument,
            Error::Parse { .. } | Error::Gap { .. } | Error::Domain(_) => ErrorKind::Data,
            Error::Numerical { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn numerical(at: Option<usize>, message: impl Into<String>) -> Self {
        Error::Numerical {
            at,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
