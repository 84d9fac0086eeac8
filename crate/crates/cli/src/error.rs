use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wavezoom::Error),
}

impl CliError {
    /// 2 for configuration, 3 for instability, 4 for other numerical
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_instability() => 3,
            CliError::Core(wavezoom::Error::Io(_)) | CliError::Core(wavezoom::Error::Json(_)) => 1,
            CliError::Core(_) => 4,
        };
        ExitCode::from(code)
    }
}
