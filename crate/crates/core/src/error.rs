use std::io;

use thiserror::Error;

/// Errors raised across the crate.
///
/// [`Error::category`] buckets the variants into configuration, data and
/// runtime failures so front ends can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {position} out of range for circuit with {len} gates")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("circuit already holds the maximum of {max_gates} gates")]
    MaxGatesExceeded { max_gates: usize },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("parse error at line {line} near `{token}`: {message}")]
    Parse {
        line: usize,
        token: String,
        message: String,
    },

    #[error("patch has {got} values but the circuit acts on {expected} qubits")]
    PatchLength { expected: usize, got: usize },

    #[error("non-finite input value at index {index}")]
    NonFinite { index: usize },

    #[error("{0} qubits exceeds the simulator limit")]
    TooManyQubits(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("validation split must contain both classes")]
    SingleClassValidation,

    #[error("both classes must be present to compute AUC")]
    SingleClass,

    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("all-zero matrix has no effective rank")]
    ZeroMatrix,

    #[error("zero variance in correlation input")]
    ZeroVariance,

    #[error("iteration {iteration}: {source}")]
    Search {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::InvalidCircuit(_) | Error::Parse { .. } => Category::Config,
            Error::Data(_)
            | Error::SingleClassValidation
            | Error::SingleClass
            | Error::Csv(_)
            | Error::PatchLength { .. }
            | Error::NonFinite { .. } => Category::Data,
            Error::Search { source, .. } => source.category(),
            _ => Category::Runtime,
        }
    }
}
