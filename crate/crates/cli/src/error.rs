use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Solver(#[from] conesv_core::Error),
}

impl CliError {
    /// Process exit code: 3 for input problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use conesv_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Input(_) | CliError::Io { .. } => 3,
            CliError::Solver(e) => match e {
                E::NumericalFailure(_) | E::NotPsd { .. } | E::RankDeficient { .. } => 4,
                _ => 3,
            },
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
