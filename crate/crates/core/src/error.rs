use std::path::PathBuf;

use thiserror::Error;

use crate::model::VehicleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis library.
///
/// Data problems (bad input files, inconsistent predictions) are kept apart
/// from usage problems so the CLI can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("row {row}: non-numeric value {value:?} in column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate sample for vehicle {vehicle} at t = {t} s")]
    DuplicateSample { vehicle: VehicleId, t: f64 },

    #[error("non-integer decimation: {source_hz} Hz -> {target_hz} Hz")]
    NonIntegerDecimation { source_hz: f64, target_hz: f64 },

    #[error("ratios must sum to 1 (got {0})")]
    BadRatios(f64),

    #[error("no modes")]
    NoModes,

    #[error("insufficient samples")]
    InsufficientSamples,

    #[error("not a lead vehicle")]
    NotLeadVehicle,

    #[error("t = {0} s is not a sample time of the track")]
    NotASampleTime(f64),

    #[error("unknown vehicle_id {0}")]
    UnknownVehicle(VehicleId),

    #[error("horizon mismatch: request {request_id} mode {mode} has {got} steps, expected {expected}")]
    HorizonMismatch {
        request_id: u64,
        mode: usize,
        got: usize,
        expected: usize,
    },

    #[error("negative probability {prob} in request {request_id}")]
    NegativeProbability { request_id: u64, prob: f64 },

    #[error("degenerate reference")]
    DegenerateReference,

    #[error("need at least 2 common unmasked bins, found {0}")]
    TooFewBins(usize),

    #[error("curves do not share bin layout")]
    BinMismatch,

    #[error("no resolvable events")]
    NoResolvableEvents,

    #[error("empty instance set")]
    EmptyInstanceSet,

    #[error("config digest mismatch: expected {expected}, found {found}")]
    ConfigDigestMismatch { expected: String, found: String },

    #[error("prediction file references unknown requests: {0:?}")]
    UnknownRequests(Vec<u64>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Toml(String),
}

impl Error {
    /// True for failures caused by the input data rather than by how the
    /// library was called.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_) | Error::BadRatios(_))
    }
}
