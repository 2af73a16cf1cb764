use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading survey data or running an estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}: row {row}: {message}")]
    Parse {
        file: PathBuf,
        row: usize,
        message: String,
    },

    #[error("referential integrity: {0}")]
    Integrity(String),

    #[error("duplicate pass key (component {component}, day {day}, pass {pass})")]
    DuplicatePass {
        component: String,
        day: u32,
        pass: u32,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("monte carlo iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration would visit {outcomes} outcomes, limit is {limit}")]
    EnumerationTooLarge { outcomes: u128, limit: u128 },

    #[error("i/o error on {path}: {source}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable process exit code: 2 for input/schema problems, 3 for estimation
    /// failures, 4 for configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Integrity(_)
            | Error::DuplicatePass { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Domain(_)
            | Error::Estimation(_)
            | Error::Iteration { .. }
            | Error::EnumerationTooLarge { .. } => 3,
            Error::Config(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
