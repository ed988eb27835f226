use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("backward called on a non-scalar value with {0} elements")]
    NonScalarLoss(usize),

    #[error("backward already ran on this graph; record a fresh forward pass first")]
    GraphConsumed,

    #[error("parameter {0} has no gradient")]
    MissingGradient(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value {value} in {context}")]
    NonFinite { context: String, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("zero vector cannot be normalized: {0}")]
    ZeroVector(String),

    #[error("global prototypes missing for (modality, class) pairs: {0:?}")]
    MissingPrototypes(Vec<(usize, usize)>),

    #[error("exact Shapley enumeration supports at most {max} modalities, got {got}; reduce the number of modalities")]
    TooManyModalities { got: usize, max: usize },

    #[error("{path}: line {line}: {message}")]
    Csv { path: String, line: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user configuration rather than runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
