use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("label column {0} not found")]
    LabelColumnMissing(String),

    #[error("no labeled samples remain after dropping rows with a missing label")]
    NoLabeledSamples,

    #[error("class {0} has no samples")]
    EmptyClass(String),

    #[error("input contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("kappa = {kappa} must satisfy 1 <= kappa < n = {n}")]
    KappaOutOfRange { kappa: usize, n: usize },

    #[error("density estimate must be normalized")]
    Unnormalized,

    #[error("fitness kernel must be {expected} (is {found})")]
    WrongFitnessState { expected: &'static str, found: &'static str },

    #[error("loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("invalid range ({min}, {max}): {reason}")]
    InvalidRange { min: f64, max: f64, reason: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every inner split was degenerate; cannot score eta")]
    NoUsableSplit,

    #[error("fold {0} has an empty test split")]
    EmptyFold(usize),

    #[error("malformed model file {path}: {message}")]
    Model { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
