use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Invalid configuration, spec, flag or report.
    pub const CONFIG: i32 = 2;
    /// Dataset missing, unreadable, malformed or empty.
    pub const DATA: i32 = 3;
    /// Fitting or scoring failed.
    pub const FIT: i32 = 4;
    /// Output files could not be written.
    pub const OUTPUT: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Fit(_) => exit::FIT,
            CliError::Output(_) => exit::OUTPUT,
        }
    }

    pub fn config(e: impl ToString) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn data(e: impl ToString) -> Self {
        CliError::Data(e.to_string())
    }

    pub fn fit(e: impl ToString) -> Self {
        CliError::Fit(e.to_string())
    }

    pub fn output(e: impl ToString) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
