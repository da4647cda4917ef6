use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A corpus or ranking record could not be decoded.
    #[error("parse error in record {record}, field `{field}`: {message}")]
    Parse {
        record: usize,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an operation's precondition (unsorted input, unlabeled example, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Illegal transition of the training queue / pool state machine.
    #[error("state machine error: {0}")]
    StateMachine(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("learner unavailable: {message}")]
    LearnerUnavailable { message: String, diagnostic: String },

    /// The response body is not JSON; `offset` is a byte offset into the raw text.
    #[error("response parse error at byte {offset}: {message}")]
    ResponseParse { offset: usize, message: String },

    #[error("response contained no valid fault-localization entries")]
    EmptyResponse { diagnostics: Vec<String> },

    #[error("endpoint error: {0}")]
    Endpoint(String),
}

impl Error {
    pub(crate) fn parse(record: usize, field: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            record,
            field: field.into(),
            message: message.to_string(),
        }
    }
}
