use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or missing setting. Exit code 2.
    #[error("config error: `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Failure while running an experiment. Exit code 1.
    #[error("runtime error: {0}")]
    Runtime(barker_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<barker_core::Error> for CliError {
    fn from(e: barker_core::Error) -> Self {
        match e {
            barker_core::Error::Config { key, reason } => CliError::Config { key, reason },
            other => CliError::Runtime(other),
        }
    }
}
