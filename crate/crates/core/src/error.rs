use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {task} label {label:?}")]
    UnknownLabel { task: String, label: String },

    #[error("duplicate tweet_id {0:?}")]
    DuplicateTweet(String),

    #[error("tweet {tweet_id:?} references user {user_id:?} with no user record")]
    MissingUser { tweet_id: String, user_id: String },

    #[error("user {0:?} has no tweets")]
    UserWithoutTweets(String),

    #[error("user {user_id:?} has conflicting {task} labels {first:?} and {second:?}")]
    ConflictingLabels {
        user_id: String,
        task: String,
        first: String,
        second: String,
    },

    #[error("user {user_id:?} has no gold {task} label")]
    MissingGold { user_id: String, task: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),

    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_line(line: usize, err: Error) -> Self {
        match err {
            Error::Parse { .. } => err,
            other => Error::Parse {
                line,
                message: other.to_string(),
            },
        }
    }
}
