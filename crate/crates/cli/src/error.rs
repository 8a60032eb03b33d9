//! CLI error kinds and their stable exit codes: 0 success, 1 invariant
//! failure, 2 config error, 3 numerical failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn from_solver(e: chaos_ns::Error) -> Self {
        use chaos_ns::Error as E;
        match e {
            E::NumericalFailure { .. } | E::CflViolation { .. } => {
                CliError::Numerical(e.to_string())
            }
            E::SnapshotIo(_) | E::SnapshotFormat(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
