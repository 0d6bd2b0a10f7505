use std::path::PathBuf;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config error: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{path}: corrupt header at byte {offset}: {reason}")]
    CorruptHeader {
        path: PathBuf,
        offset: usize,
        reason: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::UnsupportedFormat { .. } | CliError::CorruptHeader { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(line: usize, message: impl Into<String>) -> Self {
        CliError::Config {
            line,
            message: message.into(),
        }
    }
}

/// Divergence and broken numerical invariants exit with 3; parameter
/// validation failures are configuration mistakes and exit with 2.
impl From<nsf_core::Error> for CliError {
    fn from(e: nsf_core::Error) -> Self {
        use nsf_core::Error as E;
        match e {
            E::DivergenceDetected { .. } | E::HermitianViolation { .. } | E::NonDifferentiable { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
