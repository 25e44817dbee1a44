use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("expected {expected} image, got {actual}")]
    WrongColorSpace { expected: &'static str, actual: &'static str },
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("too few pixels: {pixels} pixels for {k} clusters")]
    TooFewPixels { pixels: usize, k: usize },
    #[error("selected cluster {0} has no pixels")]
    EmptyCluster(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("no interior pixel has its whole neighborhood inside the mask")]
    NoValidPixels,
    #[error("pixel ({row}, {col}) is closer than the LBP radius to the border")]
    OutOfBounds { row: usize, col: usize },

    #[error("class {0} has no training examples")]
    EmptyClass(String),
    #[error("class {0} is missing from the training set")]
    MissingClass(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,

    #[error("no class directories under {0}")]
    NoClasses(PathBuf),
    #[error("class directory {0} contains no images")]
    EmptyClassDir(PathBuf),
    #[error("class {class} has {available} examples, cannot train on {requested}")]
    InsufficientExamples { class: String, available: usize, requested: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
