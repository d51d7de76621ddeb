use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("road too short for k anchors: road {road_id} has {vertices} vertices, requested {k}")]
    RoadTooShort {
        road_id: String,
        vertices: usize,
        k: usize,
    },

    #[error("point {index} at ({x}, {y}) lies outside the {width}x{height} raster")]
    OutOfBounds {
        index: usize,
        x: i32,
        y: i32,
        width: u32,
        height: u32,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {class} has {available} samples, {shortfall} short of the {required} requested")]
    InsufficientClass {
        class: String,
        available: usize,
        required: usize,
        shortfall: usize,
    },

    #[error("class {0} has no samples")]
    EmptyClass(String),

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("diverged: non-finite gradient or weights")]
    Diverged,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
