use depthnav_service::ServiceError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    /// Bad flags (clap's own code).
    pub const USAGE: u8 = 2;
    /// Config or scene text that fails to parse or validate.
    pub const CONFIG: u8 = 3;
    pub const IO: u8 = 4;
    /// Malformed DNV1 stream.
    pub const FORMAT: u8 = 5;
    /// Path generation gave up.
    pub const GENERATION: u8 = 6;
    /// Bind failure or other service error.
    pub const SERVICE: u8 = 7;
    /// Inputs that parse but do not fit together (mismatched sizes, poses
    /// outside the room).
    pub const INPUT: u8 = 8;
}

pub const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success
  2  usage error
  3  configuration or scene error (parse or validation)
  4  I/O error
  5  frame stream format error
  6  path generation error
  7  service error (e.g. port already in use)
  8  input mismatch (stream sizes, pose outside the room)";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] depthnav::Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use depthnav::Error as E;
        match self {
            CliError::Core(e) | CliError::Service(ServiceError::Core(e)) => match e {
                E::Config { .. } | E::Parse { .. } => exit::CONFIG,
                E::Io { .. } => exit::IO,
                E::Format(_) => exit::FORMAT,
                E::Generation { .. } => exit::GENERATION,
                E::Dimension(_) | E::Precondition(_) => exit::INPUT,
            },
            CliError::Service(_) => exit::SERVICE,
            CliError::Usage(_) => exit::USAGE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
