use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Every variant maps onto one of three process exit classes through
/// [`Error::exit_code`]: usage (1), data (2) and numerical (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate question id {0:?}")]
    DuplicateQuestion(String),

    #[error("duplicate user id {0:?}")]
    DuplicateUser(String),

    #[error("question {question:?} names asker {asker:?} which is absent from the users file")]
    UnknownAsker { question: String, asker: String },

    #[error("user {user:?} lists friend {friend:?} which is absent from the users file")]
    UnknownFriend { user: String, friend: String },

    #[error("question {0:?} has no tokens after tokenization")]
    EmptyQuestion(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
