use thiserror::Error;

/// Failures of a run, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration or input data.
    #[error("configuration error: {0}")]
    Schema(String),

    /// A numerical precondition failed during computation.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Core errors split into malformed input and violated preconditions.
    pub fn from_core(e: callias_core::Error) -> Self {
        if e.is_precondition() {
            CliError::Precondition(e.to_string())
        } else {
            CliError::Schema(e.to_string())
        }
    }

    /// Prefixes the message with `what`.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Schema(m) => CliError::Schema(format!("{what}: {m}")),
            CliError::Precondition(m) => CliError::Precondition(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<callias_core::Error> for CliError {
    fn from(e: callias_core::Error) -> Self {
        Self::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
