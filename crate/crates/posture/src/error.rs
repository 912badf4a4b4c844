use std::path::PathBuf;

use posture_core::cascade::CascadeError;
use posture_core::grid::GridError;
use posture_core::schedule::ScheduleError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("matrix-format case, line {line}: {message}")]
    Matpower { line: usize, message: String },
    #[error("{path}: {source}")]
    Case {
        path: PathBuf,
        #[source]
        source: GridError,
    },
    #[error("{path}: {source}")]
    ScheduleFile {
        path: PathBuf,
        #[source]
        source: ScheduleError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
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

pub type Result<T> = std::result::Result<T, Error>;
