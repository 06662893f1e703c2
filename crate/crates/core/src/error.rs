use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or a violated precondition.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// A numerical procedure could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("county {fips}: zero two-party vote total in {year}")]
    ZeroTwoPartyTotal { fips: String, year: u16 },

    #[error("schema mismatch: {0}")]
    Schema(String),

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

    #[error("{path}: duplicate fips {fips}")]
    DuplicateFips { path: PathBuf, fips: String },

    #[error("{path}: line {line} has {found} fields, header has {expected}")]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("invalid fips code {0:?}")]
    InvalidFips(String),

    #[error("{path}: line {line}: invalid vote count {value:?} in column {column}")]
    InvalidCount {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("no feature columns survived cleaning")]
    NoSurvivingColumns,

    #[error("no counties remain after joining all sources")]
    EmptyJoin,

    #[error("every feature column has zero variance")]
    AllZeroVariance,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{rows} rows cannot be split into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("residual width is degenerate ({0})")]
    DegenerateWidth(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("unknown state {0:?}")]
    UnknownState(String),

    #[error("unknown county {0:?}")]
    UnknownCounty(String),

    #[error("county {fips}: cannot flip {requested} votes, only {available} available")]
    InjectionShortfall {
        fips: String,
        requested: u64,
        available: u64,
    },

    #[error("unknown {kind} strategy {name:?} (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("remote request for {url} failed: {message}")]
    Remote {
        url: String,
        status: Option<u16>,
        message: String,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::TooFewRows { .. }
            | Error::UnknownState(_)
            | Error::UnknownCounty(_)
            | Error::InjectionShortfall { .. }
            | Error::EmptyJoin
            | Error::UnknownStrategy { .. } => ErrorClass::Config,
            Error::DegenerateWidth(_)
            | Error::UndefinedCorrelation(_)
            | Error::NonFinite(_)
            | Error::AllZeroVariance => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    /// Whether repeating the operation may succeed (network failures).
    pub fn is_retriable(&self) -> bool {
        match self {
            Error::Remote { status, .. } => status.is_none_or(|s| s >= 500 || s == 429),
            _ => false,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
