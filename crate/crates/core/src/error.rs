use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure category; the CLI maps these onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Prediction,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("segmentation error: {0}")]
    Segmentation(String),
    #[error("scene error: {0}")]
    Scene(String),
    #[error("feature error: {0}")]
    Feature(String),
    #[error("learning error: {0}")]
    Learning(String),
    #[error("prediction error: no positive weight for effector {effector}")]
    Prediction { effector: String },
    #[error("controller error in {stage} stage: {message}")]
    Controller { stage: String, message: String },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Unsupported(_) => ErrorCategory::Config,
            Error::Prediction { .. } | Error::Controller { .. } => ErrorCategory::Prediction,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
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

pub type Result<T> = std::result::Result<T, Error>;
