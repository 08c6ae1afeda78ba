use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input; the message names the offending key.
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<sieve_core::Error> for CliError {
    fn from(e: sieve_core::Error) -> Self {
        match e {
            sieve_core::Error::InvalidParameter { name, reason } => Self::validation(name, reason),
            sieve_core::Error::EmptyModelSet => Self::validation("truncation", e.to_string()),
            sieve_core::Error::DimensionTooLarge { .. } => Self::validation("model", e.to_string()),
            sieve_core::Error::NoGammaRoot { .. } => Self::validation("rho", e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
