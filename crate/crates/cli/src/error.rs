use attn_lstm::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Argument(_) => EXIT_CONFIG,
                Error::Numeric(_) | Error::Divergence { .. } => EXIT_NUMERIC,
                Error::Shape { .. }
                | Error::Parse { .. }
                | Error::Data(_)
                | Error::Checkpoint(_)
                | Error::Io { .. } => EXIT_DATA,
            },
        }
    }
}
