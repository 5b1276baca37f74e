use std::path::PathBuf;

use thiserror::Error;

/// Exit codes of the `ehgm` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const TIME_LIMIT: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const PARSE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ehgm::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use ehgm::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Format { .. } => exit::PARSE,
            CliError::DegenerateInput(_) => exit::INFEASIBLE,
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::FAILURE,
            CliError::Core(e) => match e {
                E::TemplateFormat(_) => exit::PARSE,
                E::InfeasibleSize { .. }
                | E::SeedConflict(_)
                | E::SeedNotPrefix(_)
                | E::TemplateMismatch(_)
                | E::KNotDivisor { .. }
                | E::DuplicatePoint(_)
                | E::DimensionMismatch { .. }
                | E::InvalidInput(_) => exit::INFEASIBLE,
                _ => exit::FAILURE,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
