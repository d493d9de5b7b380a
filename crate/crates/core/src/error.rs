use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scenario or policy breaks one of its invariants. `invariant` is a
    /// stable short name such as `mass sum` or `acceptance probability range`.
    #[error("{invariant}: {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("grid of {size} policies exceeds the cap of {cap}; use a coarser grid")]
    GridTooLarge { size: u128, cap: u64 },
    #[error("cannot build a frontier from an empty point set")]
    EmptyFrontier,
    #[error("decision tree error: {0}")]
    Tree(String),
    #[error("unknown answer `{token}` at node `{node}`")]
    UnknownAnswer { node: String, token: String },
    #[error("justification replay diverges at step {step}")]
    ReplayMismatch { step: usize },
    #[error("computation cancelled")]
    Cancelled,
}

impl Error {
    pub(crate) fn validation(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant,
            detail: detail.into(),
        }
    }
}
