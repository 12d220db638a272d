use thiserror::Error;

/// Failure modes shared across the crate.
///
/// Checks that merely *record* a violation (margin reports, condition sweeps)
/// do not error; `Error` is reserved for inputs on which an operation cannot
/// produce a meaningful answer at all.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("jiggling failed: {0}")]
    Jiggle(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
