use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration and spec files.
    #[error("{0}")]
    Config(String),
    #[error("unknown {kind} `{name}`; registered: {}", .candidates.join(", "))]
    UnknownComponent {
        kind: &'static str,
        name: String,
        candidates: Vec<String>,
    },
    /// A CSV does not match the schema a plot expects.
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::UnknownComponent { .. } => 3,
            CliError::Schema(_) => 4,
            CliError::Runtime(_) => 1,
        })
    }
}

impl From<ergodic_core::Error> for CliError {
    fn from(e: ergodic_core::Error) -> Self {
        use ergodic_core::Error as E;
        match e {
            E::Parse(_) | E::InvalidSpec(_) | E::Shape(_) | E::Domain(_) | E::Index { .. } | E::EmptyInput(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
