use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix asymmetry {relative:.3e} exceeds tolerance")]
    AsymmetryTooLarge { relative: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sketch dimension {sketch} must be in 1..={rows}")]
    SketchDimExceedsRows { sketch: usize, rows: usize },

    #[error("columns are rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("invalid resolution eps = {0}")]
    InvalidResolution(f64),

    #[error("spectrum count {spectra} does not match layer count {layers}")]
    MismatchedLayers { spectra: usize, layers: usize },

    #[error("spectrum has {len} values, need at least {needed}")]
    SpectrumTooShort { len: usize, needed: usize },

    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic number {found:#010x}")]
    BadMagic { found: u32 },

    #[error("unsupported bundle version {0}")]
    VersionUnsupported(u32),

    #[error("file truncated: {0}")]
    TruncatedFile(String),

    #[error("{0} trailing bytes after last entry")]
    TrailingBytes(usize),

    #[error("duplicate entry name {0:?}")]
    DuplicateName(String),

    #[error("entry name is not valid UTF-8")]
    InvalidName,

    #[error("missing bundle entry {0:?}")]
    MissingEntry(String),

    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),

    #[error("serialization failure: {0}")]
    Serialize(String),
}

impl Error {
    /// True for errors caused by malformed or inconsistent inputs, as opposed
    /// to numeric failures during computation.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite(_)
                | Error::DivergedLoss { .. }
                | Error::RankDeficient { .. }
                | Error::NotPsd { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}
