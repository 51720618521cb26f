use thiserror::Error;

/// Errors raised by path construction, the solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("path needs at least 2 knots, got {len}")]
    TooShort { len: usize },

    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },

    #[error("times must be strictly increasing (knot {index})")]
    NonMonotoneTimes { index: usize },

    #[error("non-finite entry at knot {index}")]
    NonFiniteValue { index: usize },

    #[error("interval [{a}, {b}] is not inside the path domain [{start}, {end}]")]
    OutOfRange {
        a: f64,
        b: f64,
        start: f64,
        end: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("k = {k} exceeds the {available} interior knots")]
    KTooLarge { k: usize, available: usize },

    #[error("exhaustive search limited to {max} interior knots, got {got}")]
    TooManyPoints { got: usize, max: usize },

    #[error("partition point {time} is not a knot of the path")]
    PartitionNotOnGrid { time: f64 },

    #[error("stop-time trace was not generated from this path and lambda")]
    TraceMismatch,

    #[error("only {count} pooled stop increments (need at least {needed})")]
    TooFewStops { count: usize, needed: usize },

    #[error("row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
