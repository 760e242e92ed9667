use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lag window: {0}")]
    InvalidWindow(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("chain must have n >= 2 rows and p >= 1 columns (got n = {n}, p = {p})")]
    ChainShape { n: usize, p: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("batch size {b} out of range for n = {n} (need {min} <= b <= n/2)")]
    BatchSize { b: usize, n: usize, min: usize },

    #[error("lag {k} out of range for chain of length {n}")]
    LagOutOfRange { k: usize, n: usize },

    #[error("need at least {needed} batches, have {have}")]
    InsufficientBatches { needed: usize, have: usize },

    #[error("process is not stable: spectral radius {spectral_radius} >= 1")]
    NotStable { spectral_radius: f64 },

    #[error("|phi| must be < 1 (got {0})")]
    NotStationary(f64),

    #[error("dimension p = {p} exceeds the supported maximum {max}")]
    DimensionTooLarge { p: usize, max: usize },

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("at n = {n}: {source}")]
    AtSample {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("malformed chain file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerical routines themselves, as opposed to
    /// bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NotStable { .. }
            | Error::Singular(_)
            | Error::NotPositiveDefinite { .. }
            | Error::NotStationary(_)
            | Error::InsufficientBatches { .. } => true,
            Error::AtSample { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
