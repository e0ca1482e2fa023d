use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("line {line}: record {id:?} has no label")]
    MissingLabel { id: String, line: usize },

    #[error("line {line}: record {id:?} has empty text")]
    EmptyText { id: String, line: usize },

    #[error("invalid label {0:?}, expected \"true\" or \"false\"")]
    InvalidLabel(String),

    #[error("class {label} has {count} member(s), need at least {needed}")]
    ClassTooSmall {
        label: crate::Label,
        count: usize,
        needed: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint {id:?}: {message}")]
    Checkpoint { id: String, message: String },

    #[error("tokenizer: {0}")]
    Tokenizer(String),

    #[error("non-finite {what} encountered")]
    NonFinite { what: &'static str },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn checkpoint(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Checkpoint {
            id: id.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (files, labels, arguments)
    /// rather than by a failure while running the pipeline.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::MalformedRecord { .. }
                | Self::DuplicateId { .. }
                | Self::MissingLabel { .. }
                | Self::EmptyText { .. }
                | Self::InvalidLabel(_)
                | Self::ClassTooSmall { .. }
                | Self::InvalidArgument(_)
                | Self::Config(_)
                | Self::Checkpoint { .. }
        ) || matches!(self, Self::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
