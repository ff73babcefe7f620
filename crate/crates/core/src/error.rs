use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the activity pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("calibration failed for attribute `{attribute}`: {reason}")]
    Calibration { attribute: String, reason: String },

    #[error("degenerate clustering: {0}")]
    DegenerateClusters(String),

    #[error("empty history: {0}")]
    EmptyHistory(&'static str),

    #[error("length mismatch: {left} predictions vs {right} truth labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("missing mask for frame {frame}, picker `{picker}`: {path}")]
    MissingMask {
        frame: usize,
        picker: String,
        path: PathBuf,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("flow cache error: {0}")]
    FlowCache(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("frame {frame}, picker `{picker}`: {source}")]
    Context {
        frame: usize,
        picker: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn with_context(self, frame: usize, picker: &str) -> Self {
        Error::Context {
            frame,
            picker: picker.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 2 for data errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Calibration { .. } | Error::DegenerateClusters(_) | Error::Numeric(_) => 3,
            Error::Context { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
