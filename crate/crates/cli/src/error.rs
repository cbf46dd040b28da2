use std::path::Path;

/// Harness errors. Exit codes: 2 for configuration problems, 3 for
/// numerical failures, 1 for I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("numerical failure in {phase} phase at iteration {iteration}: {message}")]
    Numerical { phase: &'static str, iteration: usize, message: String },
    #[error(transparent)]
    Core(#[from] trpinn_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Parse(_) | Self::Core(trpinn_core::Error::Config(_)) => 2,
            Self::Numerical { .. } | Self::Core(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}
