use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] twotier::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} validation check(s) failed")]
    Validation(usize),
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use twotier::Error as M;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Model(M::InvalidConfig(_) | M::Geometry(_) | M::IntensityTooHigh { .. }) => EXIT_CONFIG,
            CliError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_FAILURE,
        }
    }
}
