use thiserror::Error;

pub type Result<T> = std::result::Result<T, XorError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XorError {
    #[error("size limit exceeded for {what}: {value} > {max}")]
    SizeLimit {
        what: &'static str,
        value: u64,
        max: u64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("malformed structure: {0}")]
    Structural(String),
    #[error("randomized procedure failed after {attempts} attempts")]
    RandomizedFailure { attempts: u32 },
    #[error("search timed out after {millis} ms")]
    Timeout { millis: u64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("linear program: {0}")]
    Lp(String),
}

impl XorError {
    pub(crate) fn size(what: &'static str, value: impl Into<u64>, max: impl Into<u64>) -> Self {
        XorError::SizeLimit {
            what,
            value: value.into(),
            max: max.into(),
        }
    }
}

/// Returns a size-limit error when `value > max`.
pub(crate) fn guard(what: &'static str, value: u64, max: u64) -> Result<()> {
    if value > max {
        Err(XorError::size(what, value, max))
    } else {
        Ok(())
    }
}
