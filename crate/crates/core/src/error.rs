use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, floor {floor:e})"
    )]
    NotPositiveDefinite { min_eigenvalue: f64, floor: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("feature variant {variant} needs {expected} channel(s), image has {found}")]
    SpecChannelMismatch {
        variant: &'static str,
        expected: usize,
        found: usize,
    },

    #[error(
        "region {x0},{y0} {w}x{h} is outside a {width}x{height} image or has fewer than 2 pixels"
    )]
    RegionOutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("image of {width}x{height} is not divisible into {tile_w}x{tile_h} tiles")]
    NotDivisible {
        width: usize,
        height: usize,
        tile_w: usize,
        tile_h: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("record {index} failed validation: {source}")]
    Validation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
