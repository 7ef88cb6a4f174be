//! On-disk artifacts exchanged between pipeline stages.
//!
//! Every binary format here is little-endian and byte-identical across
//! platforms for identical inputs:
//!
//! * frames: binary PGM (`P5`) / PPM (`P6`) with maxval 255,
//! * flow: Middlebury `.flo`,
//! * tensors: `PTNS` container (magic, `u32` rank, `u32` dims, `f32` data),
//! * signals: `index,value` CSV with 64-bit reals.

mod flo;
mod frame;
mod signal;
mod tensor;

use std::path::PathBuf;

use thiserror::Error;

pub use flo::{load_flow, read_flow, store_flow, write_flow, FlowField, VectorField, FLO_MAGIC};
pub use frame::{load_frame, read_frame, store_frame, write_frame, FrameImage};
pub use signal::{load_signal, read_signal, store_signal, write_signal, SignalSeries};
pub use tensor::{load_tensor, read_tensor, store_tensor, write_tensor, TensorFile};

/// Failure reading or writing a pipeline artifact.
#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("wrong .flo magic {0} (expected 202021.25)")]
    WrongFlowMagic(f32),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("tensor size mismatch: dims {dims:?} need {expected} values, payload holds {actual}")]
    SizeMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: index {next} does not follow {prev} (indices must strictly increase)")]
    NonMonotonicIndex { line: usize, prev: i64, next: i64 },
    #[error("line {line}: cannot parse {cell:?}")]
    NonNumeric { line: usize, cell: String },
    #[error("invalid data: {0}")]
    Invalid(String),
}

impl DataIoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataIoError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DataIoError>;

/// Reads a whole file, attaching the path to any error.
pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| DataIoError::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| DataIoError::io(path, e))
}
