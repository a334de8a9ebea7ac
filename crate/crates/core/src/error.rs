use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the topic-discovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input{}: {message}", location(.path, .line))]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },

    #[error("row count mismatch: {what}")]
    Alignment { what: String },

    #[error("row {row} is the all-zero vector")]
    ZeroVector { row: usize },

    #[error("document {row} has no tokens")]
    EmptyDocument { row: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("group {group} is empty")]
    EmptyGroup { group: usize },

    #[error("no groups formed: every point is isolated at threshold {threshold}")]
    NoGroups { threshold: f64 },

    #[error("information gain needs at least two topics, got {topics}")]
    DegenerateLabel { topics: usize },

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("descriptor lists differ in length ({expected} vs {found})")]
    LengthMismatch { expected: usize, found: usize },

    #[error("embedding store is empty")]
    EmptyStore,

    #[error("measure needs at least two topics")]
    SingleTopic,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" in {}:{}", p.display(), l),
        (Some(p), None) => format!(" in {}", p.display()),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn format_at(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn with_path(self, p: &std::path::Path) -> Self {
        match self {
            Error::Format { line, message, .. } => Error::Format {
                path: Some(p.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user-supplied parameters rather than
    /// data or I/O failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::InvalidConfig(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
