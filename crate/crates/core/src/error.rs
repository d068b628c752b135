use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("throttle percentage {0} is outside [0, 100]")]
    ThrottleOutOfRange(u32),

    #[error("throttle epoch of {0} slots is too short (need at least 100)")]
    EpochTooShort(u64),

    #[error("invalid platform: {0}")]
    InvalidPlatform(String),

    #[error("no workloads to simulate")]
    NoWorkloads,

    #[error("expected exactly one task-under-test workload, found {0}")]
    TaskUnderTestCount(usize),

    #[error("platform declares {expected} initiators but {actual} workloads were supplied")]
    InitiatorCountMismatch { expected: usize, actual: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("curves are sampled on different THR% grids")]
    GridMismatch,

    #[error("reports do not include a THR%=0 baseline")]
    MissingBaseline,

    #[error("invalid spec field `{path}`: {message}")]
    InvalidSpec { path: String, message: String },

    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),

    #[error("failed to pin thread to core {core}: {source}")]
    Affinity {
        core: usize,
        #[source]
        source: std::io::Error,
    },

    #[error("hardware counter unavailable: {0}")]
    CounterUnavailable(String),

    #[error("malformed results CSV: {0}")]
    InvalidCsv(String),

    #[error("nothing to plot: {0}")]
    NothingToPlot(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidSpec {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
