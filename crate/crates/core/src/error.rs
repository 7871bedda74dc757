use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(&'static str),

    #[error("cell ({row}, {col}) out of range for an {n}x{n} grid")]
    CellOutOfRange { row: usize, col: usize, n: usize },

    #[error("invalid height interval [{low}, {high}]")]
    InvalidInterval { low: f64, high: f64 },

    #[error("invalid layer spec: {0}")]
    InvalidLayerSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("goal vector is zero; the inflation kernel direction is undefined")]
    ZeroGoalVector,

    #[error("invalid scene at `{path}`: {reason}")]
    Scene { path: String, reason: String },

    #[error("failed to read `{path}`")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
