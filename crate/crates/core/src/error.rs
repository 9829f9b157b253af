use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate sample_id `{0}`")]
    DuplicateId(String),

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("content error for `{sample_id}`: {message}")]
    Content { sample_id: String, message: String },

    #[error("generation error for `{sample_id}`: {message}")]
    Generation {
        sample_id: String,
        message: String,
        /// Usable outputs produced before the shortfall.
        partial: Vec<String>,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("{failed} of {total} samples failed generation")]
    TooManyFailures {
        failed: usize,
        total: usize,
        report: Box<crate::generation::BuildReport>,
    },

    #[error("audit aborted: {cause}")]
    AuditAborted {
        cause: String,
        partial: Box<crate::audit::AuditOutcome>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind, used by the CLI error envelope.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Integrity(_) => "integrity",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Content { .. } => "content",
            Error::Generation { .. } => "generation",
            Error::Transport(_) => "transport",
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::AuditAborted { .. } => "audit_aborted",
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}
