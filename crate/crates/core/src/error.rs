use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("missing required CSV column `{0}`")]
    MissingColumn(String),

    #[error("token {0:?} is not a hashtag")]
    NotATag(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("no tag-bearing comments in the selected discussions")]
    EmptyTimeline,

    #[error("support is undefined over an empty transaction set")]
    UndefinedSupport,

    #[error("confidence is undefined: antecedent never occurs")]
    UndefinedConfidence,

    #[error("lift is undefined: consequent never occurs")]
    UndefinedLift,

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("onset week {start_week} lies after submission week {submission_week}")]
    OnsetAfterSubmission { start_week: i64, submission_week: i64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Csv {
            line,
            message: err.to_string(),
        }
    }
}
