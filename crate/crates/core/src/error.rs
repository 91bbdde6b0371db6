use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes: usage and
/// configuration problems exit 2, input/output problems exit 3, numerical
/// failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its legal domain (non-positive variance,
    /// malformed mixture weights, inconsistent dimensions, ...).
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    /// The same (subject, rater) pair appeared twice in an input file.
    #[error("duplicate observation for subject `{subject}` and rater `{rater}`")]
    DuplicateObservation { subject: String, rater: String },

    /// A score fell outside the declared rating scale.
    #[error("score {score} at line {line} outside the declared scale [{min}, {max}]")]
    OutOfScale {
        score: f64,
        min: f64,
        max: f64,
        line: usize,
    },

    /// No observations survived ingestion.
    #[error("dataset contains no observations")]
    EmptyDataset,

    /// A computation produced a non-finite intermediate it could not recover from.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Bad command line arguments or an unusable combination of options.
    #[error("{0}")]
    Usage(String),

    /// Malformed input file content.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("csv: {other:?}")),
        }
    }
}

impl Error {
    /// Process exit code for the CLI. 0 is success, 2 usage, 3 io, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::BadParameter(_) => 2,
            Error::DuplicateObservation { .. }
            | Error::OutOfScale { .. }
            | Error::EmptyDataset
            | Error::Parse(_)
            | Error::Io(_) => 3,
            Error::NumericalFailure(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
