use thiserror::Error;

pub type Result<T, E = QbsdError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbsdError {
    #[error("interval of {interval_seconds} s does not evenly divide a day")]
    InvalidGranularity { interval_seconds: u32 },

    #[error("timestamp {timestamp} is not a multiple of the {interval_seconds} s grid interval")]
    GridMisaligned { timestamp: i64, interval_seconds: u32 },

    #[error("timestamp {timestamp} precedes the epoch")]
    NegativeTimestamp { timestamp: i64 },

    #[error("invalid seasonality scheme: {0}")]
    InvalidScheme(String),

    #[error("contextual subset of slot {slot} reaches {deficit} slot(s) before the epoch")]
    InsufficientSpan { slot: u64, deficit: u64 },

    #[error("input is empty")]
    EmptyInput,

    #[error("non-finite value {0} in input")]
    NonFiniteValue(f64),

    #[error("contingency constant must be positive and finite, got {0}")]
    InvalidConstant(f64),

    #[error("only {present} sample(s) present, at least {required} required")]
    InsufficientHistory { present: usize, required: usize },

    #[error("slot {slot} is older than the retained window starting at slot {oldest}")]
    OutsideRetainedWindow { slot: u64, oldest: u64 },

    #[error("invalid smoothing window: {0}")]
    InvalidWindow(String),

    #[error("series of length {len} is shorter than the smoothing window {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("paired inputs differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("R² is undefined: actual values have zero variance")]
    DegenerateVariance,

    #[error("only {n} non-zero paired difference(s), at least {required} required")]
    TooFewPairs { n: usize, required: usize },

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate timestamp {timestamp} at row {row}")]
    DuplicateTimestamp { timestamp: i64, row: usize },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl QbsdError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        QbsdError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
