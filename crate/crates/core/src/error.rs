use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("invalid triangle: {0}")]
    InvalidTriangle(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error("mesh has no usable faces")]
    EmptyMesh,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("gaussians carry no normal attribute")]
    MissingNormals,

    #[error("loss became non-finite at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("image error: {0}")]
    Image(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable tag used by the command line for machine-parsable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateFace { .. } => "degenerate-face",
            Error::InvalidTriangle(_) => "invalid-triangle",
            Error::Topology(_) => "topology",
            Error::EmptyMesh => "empty-mesh",
            Error::Config(_) => "config",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Version { .. } => "version",
            Error::MissingNormals => "missing-normals",
            Error::NonFiniteLoss { .. } => "nan-loss",
            Error::Image(_) => "image",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
