use std::path::PathBuf;

/// Errors produced anywhere in the segmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("descriptors share superpixel id {0}")]
    OverlappingIds(u32),
    #[error("regions {0} and {1} are not adjacent")]
    NotAdjacent(u32, u32),
    #[error("need at least two superpixels to merge, found {0}")]
    TooFewSuperpixels(usize),
    #[error("label {0} does not fit in a 16-bit label image")]
    LabelOverflow(u32),
    #[error("manifest lists no images")]
    EmptyManifest,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
