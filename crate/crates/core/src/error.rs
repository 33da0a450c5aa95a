use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant (label maps, catalogs, configs).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    /// Two pieces of data that must agree do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Bad arguments: mismatched dimensions, empty datasets, mixed catalogs.
    #[error("input error: {0}")]
    Input(String),

    /// Non-finite parameters or gradients.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Validation(_)
            | Error::Format(_)
            | Error::Consistency(_)
            | Error::Input(_)
            | Error::Json(_) => 2,
            Error::Io { .. } => 1,
        }
    }
}
