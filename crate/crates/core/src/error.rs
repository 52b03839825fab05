use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid income record: {0}")]
    InvalidRecord(String),

    #[error("invalid tax system: {0}")]
    InvalidSystem(String),

    #[error("invalid deflation factor {0}: must be finite and > 0")]
    InvalidFactor(f64),

    #[error("marginal tax rate {rate} >= 1 ({context})")]
    RateAtOrAboveOne { rate: f64, context: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("duplicate panel key (id={id}, year={year}) at row {row}")]
    DuplicateKey { id: u64, year: i32, row: u64 },

    #[error("row {row} (id={id}, year={year}): {message}")]
    RowInvariant {
        row: u64,
        id: u64,
        year: i32,
        message: String,
    },

    #[error("overlapping income-group bounds: {0}")]
    OverlappingGroups(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("collinear design: {0}")]
    Collinear(String),

    #[error("need at least 2 clusters, found {0}")]
    TooFewClusters(usize),

    #[error("weak or absent instrument: {0}")]
    WeakInstrument(String),

    #[error("mechanical net-of-tax contrast {0} is too close to zero")]
    ZeroContrast(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
