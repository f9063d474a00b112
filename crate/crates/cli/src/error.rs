use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_IDENTITY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("computation failed: {0}")]
    Compute(#[from] cosine_audit::Error),

    #[error("identity check `{check}` failed: {detail}")]
    Identity { check: String, detail: String },
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl ToString) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Compute(_) => EXIT_COMPUTE,
            CliError::Identity { .. } => EXIT_IDENTITY,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Compute(err.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
