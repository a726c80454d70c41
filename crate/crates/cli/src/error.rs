use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Prefixes the message with `context`, keeping the category.
    pub fn context(self, context: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{context}: {m}")),
            CliError::Divergence(m) => CliError::Divergence(format!("{context}: {m}")),
            CliError::Failed(m) => CliError::Failed(format!("{context}: {m}")),
            CliError::Io(e) => CliError::Failed(format!("{context}: {e}")),
        }
    }
}

impl From<softcompose::Error> for CliError {
    fn from(e: softcompose::Error) -> Self {
        use softcompose::Error as E;
        match e {
            e if e.is_divergence() => CliError::Divergence(e.to_string()),
            E::Io(e) => CliError::Io(e),
            E::Csv(e) => CliError::Failed(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Failed(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

/// Attaches context to any error convertible to [`CliError`].
pub trait Context<T> {
    fn context(self, context: &str) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for std::result::Result<T, E> {
    fn context(self, context: &str) -> CliResult<T> {
        self.map_err(|e| e.into().context(context))
    }
}
