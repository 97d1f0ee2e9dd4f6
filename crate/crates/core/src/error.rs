use thiserror::Error;

use crate::tomo::StateLabel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max entrywise deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator has zero trace")]
    ZeroTrace,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset contains no counts")]
    NoCounts,

    #[error("dataset has no record for input {input}, projector {projector}")]
    MissingRecord {
        input: StateLabel,
        projector: StateLabel,
    },

    #[error("dataset has more than one record for input {input}, projector {projector}")]
    DuplicateRecord {
        input: StateLabel,
        projector: StateLabel,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("phase fit needs at least two distinct programmed phases")]
    DegenerateFit,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
