use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] trajspace::Error),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no checkpoint at {0}")]
    MissingCheckpoint(PathBuf),
    #[error("nothing to report: result list is empty")]
    EmptyResults,
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
