use thiserror::Error;

/// Errors raised by the tracking library.
#[derive(Debug, Error)]
pub enum Error {
    /// A row of an input file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A row parsed but carries values outside their domain (e.g. a zero-width box).
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    /// The feature file and the detection file disagree on the number of rows.
    #[error("feature file has {features} rows but detection file has {detections}")]
    Alignment { detections: usize, features: usize },

    /// Output data would contradict itself (duplicate frame/id pairs, unordered frames).
    #[error("inconsistent data: {0}")]
    Consistency(String),

    /// A configuration value is out of range or otherwise unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input violated the precondition of an operation.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Frames were fed to a sequential tracker out of order.
    #[error("frame {got} received after frame {last}")]
    Sequence { last: u32, got: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
