//! Shared error type for the whole library.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// `Input` covers malformed arguments (out-of-range indices, length
/// mismatches), `Contract` covers violated operation preconditions that
/// indicate a bug in the caller (e.g. a cut inside a pseudo-terminal),
/// `Resource` covers exceeded desk-scale bounds, and
/// `FingerprintInconsistency` is raised instead of ever returning a wrong
/// LCE length when a hash comparison disagrees with a character check.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("resource bound exceeded: {0}")]
    Resource(String),
    #[error("fingerprint inconsistency: {0}")]
    FingerprintInconsistency(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
