use navigator_core::Error as CoreError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    /// Schema violation; `path` names the offending field.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} already exists")]
    Conflict(String),
    #[error("invalid id `{0}`: use letters, digits, `-`, `_` and `.`")]
    InvalidId(String),
    #[error("{0}")]
    Request(String),
}

impl AppError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        AppError::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Core(e) => match e {
                CoreError::Validation { .. } => "validation",
                CoreError::Ingestion(_) => "ingestion",
                CoreError::Configuration(_) => "configuration",
                CoreError::GridTooLarge { .. } => "grid_too_large",
                CoreError::EmptyFrontier => "empty_frontier",
                CoreError::Tree(_) => "tree",
                CoreError::UnknownAnswer { .. } => "unknown_answer",
                CoreError::ReplayMismatch { .. } => "replay_mismatch",
                CoreError::Cancelled => "cancelled",
            },
            AppError::Parse { .. } => "parse",
            AppError::Io { .. } => "io",
            AppError::NotFound(_) => "not_found",
            AppError::Conflict(_) => "conflict",
            AppError::InvalidId(_) => "invalid_id",
            AppError::Request(_) => "request",
        }
    }
}

impl<E: std::fmt::Display> From<serde_path_to_error::Error<E>> for AppError {
    fn from(e: serde_path_to_error::Error<E>) -> Self {
        let path = e.path().to_string();
        AppError::Parse {
            path,
            message: e.inner().to_string(),
        }
    }
}
