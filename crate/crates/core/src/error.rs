use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error(
        "mesh fails watertightness check: {open_edges} edge(s) not shared by exactly two faces"
    )]
    NotWatertight { open_edges: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("duplicate body id {0}")]
    DuplicateId(u32),

    #[error("mesh file not found: {0}")]
    MissingMesh(PathBuf),

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("malformed field file: {0}")]
    MalformedField(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("unknown body id {0}")]
    UnknownId(u32),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("body {body} has a vertex at z = {z}, at or behind the near plane")]
    BehindCamera { body: u32, z: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
