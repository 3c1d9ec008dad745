use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected 1 to 3 cells, got {0}")]
    CellCount(usize),
    #[error("invalid electrical parameter: {0}")]
    InvalidParameter(String),
    #[error("variation {pct}% is outside the calibration domain")]
    OutOfCalibrationDomain { pct: f64 },
    #[error("calibration table: {0}")]
    Calibration(String),

    #[error("subarray is not activated")]
    NotActivated,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("row length {got} does not match subarray row size {expected}")]
    RowLength { expected: usize, got: usize },
    #[error("invalid row address {0}")]
    InvalidAddress(String),
    #[error("reliability fault: {bits} unreliable bit position(s) activating {wordlines}")]
    ReliabilityFault { bits: usize, wordlines: String },

    #[error("destination aliases a source the sequence cannot preserve: {0}")]
    SameRow(String),
    #[error("operation {op} expects {expected} source operand(s)")]
    Arity { op: &'static str, expected: usize },
    #[error("RowClone-FPM requires source and destination in the same subarray")]
    CrossSubarray,
    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("address {0:#x} is not row-aligned")]
    Misaligned(u64),
    #[error("operation size {size} bytes is smaller than a row ({row} bytes)")]
    SizeTooSmall { size: u64, row: u64 },
    #[error("no placement for row {0}")]
    UnplacedRow(u64),

    #[error("energy parameters are not calibrated")]
    Uncalibrated,
    #[error("energy fit diverged: max relative error {max_rel_err:.4} exceeds {limit}")]
    FitDiverged { max_rel_err: f64, limit: f64 },

    #[error("workload needs {needed} bitmaps but {available} are available")]
    InsufficientBitmaps { needed: usize, available: usize },
    #[error("constant {value} does not fit in {bits} bits (or c1 > c2)")]
    ConstantOutOfRange { value: u64, bits: u32 },

    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
