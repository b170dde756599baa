use thiserror::Error;

/// CLI failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// Prefixes the message with the pipeline stage that failed.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("stage {stage}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("stage {stage}: {m}")),
            CliError::Io(m) => CliError::Io(format!("stage {stage}: {m}")),
        }
    }
}

impl From<ssacpd::Error> for CliError {
    fn from(e: ssacpd::Error) -> Self {
        use ssacpd::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidInput(_)
            | E::TooFewSamples { .. }
            | E::DimensionMismatch { .. }
            | E::Arity(..)
            | E::Config(_)
            | E::Json(_) => CliError::Validation(msg),
            E::Io(_) => CliError::Io(msg),
            E::Csv(ref c) if c.is_io_error() => CliError::Io(msg),
            E::Csv(_) => CliError::Validation(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
