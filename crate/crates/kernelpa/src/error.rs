//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Unified error type.
///
/// Every fallible public operation returns one of these variants so callers
/// (notably the CLI) can render a single consistent diagnostic line.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument or configuration value is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two records that must agree in length (or rate) do not.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A numerical estimation step could not produce a defined result
    /// (empty support, no correlation peak, singular normal equations, ...).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A regressor column collapsed below the degeneracy threshold where the
    /// operation cannot continue (fit handles degeneracy internally; this is
    /// raised where a caller asked for something that needs the full basis).
    #[error("degenerate basis: {0}")]
    Degeneracy(String),

    /// Structured input (signal files, sidecars, model files, configs) failed
    /// to parse or failed a consistency check.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying filesystem failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor used by parsers to attach positional context.
    pub(crate) fn format_at(line: usize, msg: impl std::fmt::Display) -> Self {
        Error::Format(format!("line {line}: {msg}"))
    }
}
