use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite accelerometer component")]
    NonFiniteInput,

    #[error("input sequence is empty")]
    EmptyInput,

    #[error("context weights must have 7 entries summing to 1 (got {len} entries, sum {sum})")]
    BadWeights { len: usize, sum: f64 },

    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),

    #[error("no valid epochs to estimate score quantiles from")]
    NoValidEpochs,

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("recording `{0}` has no usable samples")]
    EmptyRecording(String),

    #[error("timestamp went backwards at row {row}: {previous} -> {current}")]
    NonMonotonicTime { row: usize, previous: f64, current: f64 },

    #[error("bad time value `{value}` at row {row}")]
    BadTimeFormat { row: usize, value: String },

    #[error("bad value `{value}` for column `{column}` at row {row}")]
    BadField { row: usize, column: String, value: String },

    #[error("sample at t={current} arrived after t={previous}")]
    OutOfOrderSample { previous: f64, current: f64 },

    #[error("no completed epochs in stream")]
    NoCompletedEpochs,

    #[error("epoch index {index} out of range for {len} labels")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("annotation id `{annotation}` does not match recording `{recording}`")]
    IdMismatch { recording: String, annotation: String },

    #[error("calibration corpus is empty")]
    EmptyCorpus,

    #[error("bad threshold grid: {0}")]
    BadGrid(String),

    #[error("bad synthetic spec: {0}")]
    BadSpec(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
