use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModiscoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invariant violation: {0}")]
    Validation(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ModiscoError>,
    },
}

pub type Result<T> = std::result::Result<T, ModiscoError>;

impl ModiscoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModiscoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        ModiscoError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
