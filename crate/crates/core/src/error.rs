use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("brand index {index} out of range for vocabulary of size {size}")]
    BrandIndex { index: usize, size: usize },
    #[error("expected a {expected} filter")]
    FilterKind { expected: &'static str },
    #[error("no action model for item {item_id:?} and filter kind {kind}")]
    MissingModel { item_id: String, kind: &'static str },
    #[error("empty prior propensity")]
    EmptyPrior,
    #[error("all relevance scores are zero")]
    AllZeroScores,
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
    #[error("unknown item id {0:?}")]
    UnknownItem(String),
    #[error("unknown brand {0:?}")]
    UnknownBrand(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("no eligible data: {0}")]
    NoData(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
