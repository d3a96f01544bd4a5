use thiserror::Error;

/// Errors from the linear-algebra and manifold layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("result left the manifold: orthogonality defect {defect:.3e}")]
    OrthogonalityLost { defect: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
