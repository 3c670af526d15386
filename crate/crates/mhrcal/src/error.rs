use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::manifest::Split;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] mhrcal_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing header sidecar {}", .0.display())]
    MissingHeader(PathBuf),
    #[error("payload {} has {actual} bytes but the header implies {expected}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("unsupported dtype {0:?}")]
    BadDtype(String),
    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("duplicate case id {0:?}")]
    DuplicateCaseId(String),
    #[error("case {case_id:?} lists {actual} raters, manifest declares {expected}")]
    RaterCountMismatch {
        case_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("no cases in the {0} split")]
    EmptySplit(Split),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(_) => "validation",
            Error::Io { .. } => "io_failure",
            Error::MissingHeader(_) => "missing_header",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::BadDtype(_) => "bad_dtype",
            Error::Parse { .. } => "parse_error",
            Error::DuplicateCaseId(_) => "duplicate_case_id",
            Error::RaterCountMismatch { .. } => "rater_count_mismatch",
            Error::EmptySplit(_) => "empty_split",
            Error::Csv(_) => "csv",
            Error::Invalid(_) => "invalid_argument",
        }
    }
}
