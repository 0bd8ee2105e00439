use std::path::PathBuf;

use thiserror::Error;

use crate::day::DayDate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid date `{0}` (expected YYYY-MM-DD)")]
    InvalidDate(String),

    #[error("no zone or scan observations for `{0}`")]
    EmptyObservations(String),

    #[error("invalid inference parameters: {0}")]
    InvalidParams(String),

    #[error("positive RDAP record for `{domain}` queried {query_time} has no registration date")]
    MissingRegistrationDate { domain: String, query_time: DayDate },

    #[error("RDAP record for `{0}` has the wrong polarity for this phase")]
    WrongPolarity(String),

    #[error("`{0}` is not a registrable name under the loaded suffix rules")]
    NotRegistrable(String),

    #[error("timeline is for `{timeline}` but linkage names `{linkage}`")]
    DomainMismatch { linkage: String, timeline: String },

    #[error("operation requires a zombie verdict with a known zombie birth")]
    NotZombie,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("design config has no entry for ecosystem `{0}`")]
    MissingDesignEntry(String),

    #[error("invalid world parameters: {0}")]
    DegenerateWorld(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: rows for `{domain}` are not contiguous; input must be grouped by domain")]
    NotGrouped {
        path: PathBuf,
        line: u64,
        domain: String,
    },

    #[error("digest mismatch for {path}: manifest {expected}, file {actual}")]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
