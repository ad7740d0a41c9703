use m3net_core::ErrorKind;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] m3net_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    /// A check ran to completion and failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
                ErrorKind::Contract => EXIT_INTERNAL,
            },
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Failed(_) => EXIT_NUMERIC,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
