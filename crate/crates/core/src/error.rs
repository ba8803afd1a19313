use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("setting {setting} outside supported range 0..={max_setting}")]
    RangeViolation { setting: i64, max_setting: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The channel sweep hit the top of the tuning range without hearing a beacon.
    #[error("channel sweep reached setting {max_setting} without receiving a beacon")]
    SweepFailure { max_setting: u32 },

    #[error("trace format error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
