use std::path::PathBuf;

use crate::model::MemberId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("interval {index} is out of range for an axis of {count} intervals")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("member {member} is active at interval {t} but has no {side} price")]
    MissingPrice {
        member: usize,
        t: usize,
        side: &'static str,
    },

    #[error("no weight supplied for member {0}")]
    MissingWeight(MemberId),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: row {row}: {message}")]
    Malformed {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: member {member}: timestamp at row {row} does not increase")]
    NonMonotonic {
        path: PathBuf,
        member: MemberId,
        row: usize,
    },

    #[error("member {member} has no entry in the tariff table")]
    UnknownMember { member: MemberId },

    #[error("community failed validation:\n{0}")]
    Validation(crate::model::ValidationReport),

    #[error("requested slice is absent from the sweep: {0}")]
    SliceAbsent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| Error::Csv { path, source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Self {
        let path = path.into();
        move |source| Error::Json { path, source }
    }
}
