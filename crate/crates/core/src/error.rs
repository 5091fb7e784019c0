use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("full materialization refused: {count} variations exceed the hard cap of {cap}")]
    CapExceeded { count: u64, cap: u64 },

    #[error("no available variation to publish: the inventory is empty")]
    EmptyInventory,

    #[error("picker rejected: {0}")]
    PickerRejected(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("page {page} not found (valid pages: 1..={pages})")]
    PageNotFound { page: u64, pages: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("unexpected response: {0}")]
    Protocol(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
