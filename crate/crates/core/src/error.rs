use std::path::Path;

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::corpus::CorpusError;
use crate::embedding::EmbeddingError;
use crate::knn::KnnError;
use crate::pipeline::ConfigError;
use crate::schedule::ScheduleError;
use crate::scoring::ParseScoredError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    ScoredPairs(#[from] ParseScoredError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category used by the CLI's error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Corpus(CorpusError::Io { .. })
            | Error::Embedding(EmbeddingError::Io { .. })
            | Error::Io { .. } => "io",
            Error::Corpus(_) => "corpus",
            Error::Embedding(EmbeddingError::Format { .. }) => "format",
            Error::Embedding(_) => "embedding",
            Error::Knn(_) => "knn",
            Error::Calibration(_) => "calibration",
            Error::Config(_) => "config",
            Error::Schedule(_) => "schedule",
            Error::ScoredPairs(_) => "format",
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Reads a UTF-8 file, tagging failures with the path.
pub fn read_text_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
