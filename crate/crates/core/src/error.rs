use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or map shape does not match the scenario it is used with.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The operation needs a scenario shape it does not have (e.g. CHSH on
    /// a non-binary alphabet).
    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} would enumerate {count} items, above the cap of {cap}")]
    CapExceeded { what: &'static str, count: u128, cap: u128 },

    /// The LP or another numerical routine failed to produce a usable
    /// answer. Never used for a negative verdict.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid quantum model: {0}")]
    InvalidModel(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
