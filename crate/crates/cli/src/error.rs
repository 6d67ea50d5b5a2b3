use thiserror::Error;

/// Exit status for a run whose checks did not all pass.
pub const EXIT_FAILED_CHECKS: i32 = 1;
/// Exit status for unreadable, malformed or inconsistent input.
pub const EXIT_INVALID: i32 = 2;
/// Exit status for a numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] overrun_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(overrun_core::Error::Numerical(_)) => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let num = CliError::Core(overrun_core::Error::Numerical("no root".into()));
        assert_eq!(num.exit_code(), EXIT_NUMERICAL);
        let input = CliError::Core(overrun_core::Error::Input("bad".into()));
        assert_eq!(input.exit_code(), EXIT_INVALID);
        assert_eq!(CliError::Parse("x".into()).exit_code(), EXIT_INVALID);
        assert_eq!(CliError::Invalid("x".into()).exit_code(), EXIT_INVALID);
    }
}
