use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{variant} belongs to the {family} family, expected {expected}")]
    WrongFamily {
        variant: String,
        family: String,
        expected: String,
    },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("geometry mismatch: model expects {expected}, data has {found}")]
    Geometry { expected: String, found: String },

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error(transparent)]
    Nn(#[from] amc_nn::NnError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}
