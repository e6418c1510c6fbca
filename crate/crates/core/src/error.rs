use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("grazing incidence: |psi| = {0} rad is not below pi/2")]
    GrazingIncidence(f64),

    #[error("subcarrier index {index} outside 1..={count}")]
    SubcarrierIndex { index: usize, count: usize },

    #[error("echo length {got} does not match {expected} subcarriers")]
    EchoLength { got: usize, expected: usize },

    #[error("no peak above the noise floor (peak/median = {ratio:.3})")]
    NoPeak { ratio: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time slot {t} outside trajectory of length {len}")]
    SlotOutOfRange { t: usize, len: usize },

    #[error("all particle weights vanished")]
    DegenerateWeights,

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
