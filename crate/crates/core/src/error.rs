use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range; `name` is the flag/key.
    #[error("{name} out of range: {detail}")]
    Domain { name: String, detail: String },

    #[error("nonzero numerator {numerator} over zero denominator")]
    ZeroDenominator { numerator: f64 },

    #[error("degenerate combination: {0}")]
    Degenerate(String),

    #[error("{what} exceeds the configured cap: {detail}")]
    CapExceeded { what: String, detail: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Domain {
            name: name.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
