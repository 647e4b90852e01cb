use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: cannot read {path}: {source}", path = path.display())]
    ReadConfig { path: PathBuf, source: std::io::Error },

    #[error("config error: schema violation: {0}")]
    Schema(String),

    #[error("config error: bad override `{assignment}`: {reason}")]
    Override { assignment: String, reason: String },

    #[error("config error: value out of domain: {0}")]
    Domain(String),

    #[error("config error: FPT_THREADS must be a positive integer, got `{0}`")]
    Threads(String),

    #[error("output error: cannot write {path}: {source}", path = path.display())]
    Output { path: PathBuf, source: std::io::Error },

    #[error("computation failed: {0}")]
    Compute(#[from] fpt_core::FptError),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            _ => 1,
        }
    }
}
