use std::path::PathBuf;

use dreammap::dreamer::DreamError;
use dreammap::gp::GpError;
use dreammap::synth::SynthError;
use dreammap::world_model::ModelError;
use dreammap::{FormatError, MapError};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Config(_) => CliError::Usage(e.to_string()),
            SynthError::Map(m) => m.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Diverged { .. } | ModelError::NonFinite(_) => CliError::Numerical(e.to_string()),
            ModelError::Config(m) => CliError::Usage(format!("invalid training config: {m}")),
            ModelError::Map(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        match e {
            GpError::Cholesky(_) => CliError::Numerical(e.to_string()),
            GpError::Map(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DreamError> for CliError {
    fn from(e: DreamError) -> Self {
        match e {
            DreamError::Config(m) => CliError::Usage(format!("invalid acquisition config: {m}")),
            DreamError::BudgetTooLarge { .. } => CliError::Usage(e.to_string()),
            DreamError::Model(m) => m.into(),
            DreamError::Map(m) => m.into(),
            DreamError::Format(f) => f.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
