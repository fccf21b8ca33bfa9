use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format: {0}")]
    Format(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no alternative operator for {0:?}")]
    NoAlternativeOperator(String),

    #[error("corrupt instance: {0}")]
    CorruptInstance(String),

    #[error("provider mismatch: {0}")]
    ProviderMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Format(_) => "format",
            Error::EmptyCorpus => "empty-corpus",
            Error::EmptyDataset => "empty-dataset",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non-finite",
            Error::NoAlternativeOperator(_) => "no-alternative-operator",
            Error::CorruptInstance(_) => "corrupt-instance",
            Error::ProviderMismatch(_) => "provider-mismatch",
        }
    }
}
