use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} at cell ({row}, {col}) is not a finite physical value")]
    ValueDomain { row: usize, col: usize, value: f64 },

    #[error("unknown codec `{0}`")]
    UnknownCodec(String),

    #[error("invalid codec: {0}")]
    InvalidCodec(String),

    #[error("grid of width {w} and height {h} is not divisible by sampling factor {k}")]
    Dimension { w: usize, h: usize, k: usize },

    #[error("incompatible shapes: {0}")]
    IncompatibleShapes(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
