use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),

    #[error("malformed wav file {path}: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("scene {scene_id}: {reason}")]
    Scene { scene_id: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (CLI exit code 1).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Shape(_)
                | Error::NonFinite(_)
                | Error::UnsupportedWav(_)
                | Error::Config(_)
                | Error::Scene { .. }
                | Error::Checkpoint { .. }
                | Error::MalformedWav { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
