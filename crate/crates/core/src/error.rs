use std::path::PathBuf;

use thiserror::Error;

use crate::ops::OpKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("failed to encode image {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("unsupported image format for {path}: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("unsupported channel layout for {path}: {message}")]
    ChannelCount { path: PathBuf, message: String },

    #[error("invalid image buffer: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("{kind} expects {expected} parameters, got {got}")]
    ParamDimension {
        kind: OpKind,
        expected: usize,
        got: usize,
    },

    #[error("{kind} parameter {index} = {value} outside [{lo}, {hi}]")]
    ParamBounds {
        kind: OpKind,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{kind} curve weights sum to {sum}, below the minimum {min}")]
    CurveNormalization { kind: OpKind, sum: f64, min: f64 },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown cost function {0:?}")]
    UnknownCost(String),

    #[error("unknown operation {0:?}")]
    UnknownOp(String),

    #[error("malformed plan: {0}")]
    PlanFormat(String),

    #[error("malformed manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("image too small for metric: {0}")]
    TooSmall(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
