use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training bag is empty")]
    EmptyBag,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sample `{id}`: {message}")]
    Sample { id: String, message: String },

    #[error("class {0:?} has no samples")]
    MissingClass(crate::Label),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unknown class name `{0}`")]
    UnknownClass(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn sample(id: &str, message: impl Into<String>) -> Self {
        Error::Sample {
            id: id.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
