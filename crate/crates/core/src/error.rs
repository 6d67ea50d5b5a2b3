use thiserror::Error;

/// Errors produced by the inference engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A design is internally inconsistent or degenerate.
    #[error("configuration error: {0}")]
    Config(String),
    /// Observed data are inconsistent with the design.
    #[error("input error: {0}")]
    Input(String),
    /// A root search or iteration failed.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
